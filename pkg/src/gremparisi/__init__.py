"""Quenched free energy of the GREM perceptron: Parisi functional, its
entropy-constrained Gibbs dual, and finite-N simulation."""

from .errors import ConvergenceError, InvalidInputError
from .measures import (
    FiniteMeasure,
    MarkovKernel,
    ModelSpec,
    SupportAxis,
    compose,
    conditional_relative_entropy,
    disintegrate,
    entropy_dual_gap,
    marginal,
    product_measure,
    relative_entropy,
    total_variation,
)
from .parisi import (
    BlockStructure,
    ParisiMinimum,
    PhiTable,
    TemperatureLadder,
    descend_phi,
    detect_blocks,
    minimize_parisi,
    parisi_gradient,
    parisi_gradient_s,
    parisi_value,
    replica_symmetric_value,
)
from .gibbs import (
    ConstraintReport,
    DualityReport,
    HierarchicalGibbs,
    build_gibbs,
    constraint_slacks,
    flatten,
    gibbs_value,
    kernel_entropy_profile,
    prefix_entropies,
    verify_duality,
)
from .oracle import FeasibleSet, OracleSolution, bruteforce_max, maximize_gibbs_constrained, rate_function
from .simulator import (
    DisorderSample,
    FreeEnergyTable,
    SimulationPlan,
    count_in_neighborhood,
    empirical_measure,
    quenched_free_energy,
    run_convergence_study,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
