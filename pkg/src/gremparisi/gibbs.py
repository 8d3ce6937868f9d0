"""Hierarchical Gibbs measures, the Gibbs functional and the duality check."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .measures import (
    LOG2,
    FiniteMeasure,
    MarkovKernel,
    ModelSpec,
    marginal,
    relative_entropy,
    total_variation,
)
from .parisi import (
    BlockStructure,
    DescentResult,
    PhiTable,
    TemperatureLadder,
    _as_m,
    descend_phi,
    minimize_parisi,
    parisi_value,
)

TIGHT_TOL = 1e-6
FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class HierarchicalGibbs:
    """Starting law on the first coordinate followed by kernels K_2..K_n."""

    model: ModelSpec
    m: np.ndarray
    start: FiniteMeasure
    kernels: tuple
    descent: DescentResult

    def prefix(self, j: int) -> FiniteMeasure:
        """The law G^(j) of the first j coordinates, built forward from the kernels."""
        if not 1 <= j <= self.model.n:
            raise InvalidInputError(f"prefix level {j} outside 1..{self.model.n}")
        w = self.start.weights
        for K in self.kernels[: j - 1]:
            w = w[..., None] * K.table
        return FiniteMeasure(self.model.axes[:j], w)

    @property
    def ladder(self) -> np.ndarray:
        return self.m


@dataclass(frozen=True)
class ConstraintReport:
    """Slack j is Gamma_j log 2 - H(nu^(j) | mu^(j))."""

    slacks: tuple
    tight: tuple

    @property
    def min_slack(self) -> float:
        return min(self.slacks)

    def feasible(self, tol: float = 0.0) -> bool:
        return all(x >= -tol for x in self.slacks)


@dataclass(eq=False)
class DualityReport:
    ladder: TemperatureLadder
    blocks: BlockStructure
    parisi_value: float
    gibbs_value: float
    oracle_value: float
    gap: float
    min_slack: float
    tight_slacks: tuple
    oracle_margin: float
    total_variation: float
    tol: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        return {
            "m": list(self.ladder.m),
            "blocks": [list(b) for b in self.blocks.blocks],
            "boundaries": list(self.blocks.boundaries),
            "terminal": list(self.blocks.terminal),
            "parisi_value": self.parisi_value,
            "gibbs_value": self.gibbs_value,
            "oracle_value": self.oracle_value,
            "gap": self.gap,
            "min_slack": self.min_slack,
            "tight_slacks": list(self.tight_slacks),
            "oracle_margin": self.oracle_margin,
            "total_variation": self.total_variation,
            "tol": self.tol,
            "passed": self.passed,
            "failures": list(self.failures),
        }


def build_gibbs(phi: PhiTable, m) -> HierarchicalGibbs:
    """Tilted starting law and kernels for ladder ``m`` (any positive vector)."""
    model = phi.model
    m = _as_m(m, model.n)
    desc = descend_phi(phi, m)
    mu1 = model.level_weights(1)
    start = np.exp(m[0] * (desc.phi(1) - desc.phi0)) * mu1
    kernels = []
    for j in range(2, model.n + 1):
        lift = desc.phi(j) - desc.phi(j - 1)[..., None]
        table = np.exp(m[j - 1] * lift) * model.level_weights(j)
        kernels.append(MarkovKernel(model.axes[: j - 1], model.axes[j - 1], table))
    return HierarchicalGibbs(
        model=model,
        m=m,
        start=FiniteMeasure(model.axes[:1], start),
        kernels=tuple(kernels),
        descent=desc,
    )


def flatten(G: HierarchicalGibbs) -> FiniteMeasure:
    """Materialise gamma ⊗ K_2 ⊗ ... ⊗ K_n as a dense measure."""
    return G.prefix(G.model.n)


def gibbs_value(phi: PhiTable, nu: FiniteMeasure) -> float:
    """Integral of phi against nu minus H(nu | mu)."""
    if nu.shape != phi.model.shape:
        raise InvalidInputError(f"measure shape {nu.shape} != model shape {phi.model.shape}")
    mu = phi.model.mu
    if nu.axes != mu.axes:
        raise InvalidInputError("measure axes differ from the model axes")
    return float(np.sum(phi.values * nu.weights)) - relative_entropy(nu, mu)


def prefix_entropies(nu: FiniteMeasure, model: ModelSpec) -> np.ndarray:
    """H(nu^(j) | mu^(j)) for j = 1..n."""
    return np.array(
        [relative_entropy(marginal(nu, j), model.mu_prefix(j)) for j in range(1, model.n + 1)]
    )


def constraint_slacks(
    nu: FiniteMeasure, model: ModelSpec, tight_tol: float = TIGHT_TOL
) -> ConstraintReport:
    slacks = model.Gamma * LOG2 - prefix_entropies(nu, model)
    tight = tuple(j for j, x in enumerate(slacks, start=1) if abs(x) <= tight_tol)
    return ConstraintReport(tuple(float(x) for x in slacks), tight)


def kernel_entropy_profile(G: HierarchicalGibbs) -> np.ndarray:
    """d_1 = H(gamma | mu_1), d_j = G^(j-1)-average of H(K_j(x, .) | mu_j)."""
    model = G.model
    d = np.empty(model.n)
    d[0] = relative_entropy(G.start, model.level_measure(1))
    head = G.start.weights
    for j, K in enumerate(G.kernels, start=2):
        d[j - 1] = float(np.sum(head * K.row_entropies(model.level_weights(j))))
        head = head[..., None] * K.table
    return d


def kernel_entropy_profile_via_phi(G: HierarchicalGibbs) -> np.ndarray:
    """m_j (int phi_j dG^(j) - int phi_{j-1} dG^(j-1)); equals the entropy profile."""
    model = G.model
    out = np.empty(model.n)
    prev = G.descent.phi0
    for j in range(1, model.n + 1):
        cur = float(np.sum(G.descent.phi(j) * G.prefix(j).weights))
        out[j - 1] = G.m[j - 1] * (cur - prev)
        prev = cur
    return out


def verify_duality(
    phi: PhiTable,
    tol: float = 1e-8,
    parisi_tol: float = 1e-10,
    oracle_tol: float = 1e-10,
) -> DualityReport:
    """Minimise the Parisi functional, build G at the minimiser and cross-check.

    Checks feasibility with tightness at the ends of the blocks below one, the
    Gibbs = Parisi identity, and that no constrained maximiser found by the
    independent oracle beats G.
    """
    from .oracle import maximize_gibbs_constrained

    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    model = phi.model
    res = minimize_parisi(phi, tol=parisi_tol)
    G = flatten(build_gibbs(phi, res.ladder))
    g_val = gibbs_value(phi, G)
    p_val = parisi_value(phi, res.ladder)
    report = constraint_slacks(G, model)
    tight = tuple(report.slacks[j - 1] for j in res.blocks.boundaries)
    sol = maximize_gibbs_constrained(phi, model, tol=oracle_tol)
    out = DualityReport(
        ladder=res.ladder,
        blocks=res.blocks,
        parisi_value=p_val,
        gibbs_value=g_val,
        oracle_value=sol.value,
        gap=abs(g_val - p_val),
        min_slack=report.min_slack,
        tight_slacks=tight,
        oracle_margin=g_val - sol.value,
        total_variation=total_variation(G, sol.nu),
        tol=tol,
    )
    if out.gap > tol:
        out.failures.append(f"Gibbs/Parisi gap {out.gap:.3e} exceeds {tol:.1e}")
    if out.min_slack < -FEASIBILITY_TOL:
        out.failures.append(f"G violates a constraint by {-out.min_slack:.3e}")
    for j, x in zip(res.blocks.boundaries, tight):
        if abs(x) > TIGHT_TOL:
            out.failures.append(f"constraint {j} should be tight, slack {x:.3e}")
    if out.oracle_margin < -tol:
        out.failures.append(f"oracle beats G by {-out.oracle_margin:.3e}")
    return out
