"""Command-line harness: ``grem-parisi <workflow> --config FILE [overrides]``.

Flag values override the ``run`` section of the config, which overrides the
built-in defaults.  The report is JSON on stdout, or in ``--out``; the
simulate workflow also writes its table as CSV next to the report.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import WORKFLOWS, ConfigError, ExperimentConfig, parse_config
from .errors import ConvergenceError, InvalidInputError
from .gibbs import build_gibbs, constraint_slacks, flatten, gibbs_value, prefix_entropies, verify_duality
from .measures import LOG2, FiniteMeasure, relative_entropy
from .oracle import maximize_gibbs_constrained
from .parisi import minimize_parisi, parisi_gradient_s
from .simulator import SimulationPlan, count_in_neighborhood, run_convergence_study

SCHEMA = "grem-parisi-report/1"
METRIC_NOTE = "neighborhoods use total-variation distance on the finite support"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _measure_dict(nu: FiniteMeasure) -> dict:
    return {
        "support": [list(ax.labels) for ax in nu.axes],
        "weights": [float(x) for x in nu.weights.ravel()],
    }


def _parisi_min(cfg: ExperimentConfig) -> tuple[dict, bool]:
    phi = cfg.phi_table()
    res = minimize_parisi(phi, tol=cfg.tol)
    G = flatten(build_gibbs(phi, res.ladder))
    out = {
        "m": list(res.ladder.m),
        "value": res.value,
        "blocks": [list(b) for b in res.blocks.blocks],
        "boundaries": list(res.blocks.boundaries),
        "terminal": list(res.blocks.terminal),
        "K": res.blocks.K,
        "gradient_s": [float(x) for x in parisi_gradient_s(phi, res.ladder)],
        "kkt_residual": res.residual,
        "iterations": res.iterations,
        "gibbs_value": gibbs_value(phi, G),
        "slacks": list(constraint_slacks(G, phi.model).slacks),
    }
    return out, True


def _duality_check(cfg: ExperimentConfig) -> tuple[dict, bool]:
    report = verify_duality(cfg.phi_table(), tol=max(cfg.tol, 1e-8))
    return report.as_dict(), report.passed


def _oracle_max(cfg: ExperimentConfig) -> tuple[dict, bool]:
    phi = cfg.phi_table()
    sol = maximize_gibbs_constrained(phi, tol=cfg.tol)
    out = {
        "value": sol.value,
        "measure": _measure_dict(sol.nu),
        "active": list(sol.active),
        "multipliers": [float(x) for x in sol.multipliers],
        "slacks": list(sol.slacks),
        "relative_entropy": relative_entropy(sol.nu, phi.model.mu),
        "iterations": sol.iterations,
        "kkt_residual": sol.residual,
        "restoration_mix": sol.restoration,
    }
    return out, True


def _simulate(cfg: ExperimentConfig) -> tuple[dict, bool]:
    table = run_convergence_study(cfg.phi_table(), cfg.N, cfg.replicas, seed=cfg.seed)
    return {"rows": table.as_dicts(), "csv": table.to_csv()}, True


def _counting(cfg: ExperimentConfig) -> tuple[dict, bool]:
    model = cfg.model()
    if cfg.center is None:
        center = model.mu
    else:
        center = FiniteMeasure(model.axes, np.reshape(cfg.center, model.shape))
    rows = []
    for N in sorted(cfg.N):
        plan = SimulationPlan(model, N, cfg.seed, cfg.replicas)
        counts = [count_in_neighborhood(plan.sample(r), center, cfg.radius) for r in range(cfg.replicas)]
        rates = [math.log(c) / N if c > 0 else None for c in counts]
        rows.append(
            {
                "N": N,
                "counts": counts,
                "log_rate": rates,
                "zero_fraction": sum(c == 0 for c in counts) / len(counts),
            }
        )
    out = {
        "center": _measure_dict(center),
        "radius": cfg.radius,
        "center_prefix_entropy": [float(x) for x in prefix_entropies(center, model)],
        "entropy_budget": [float(x) for x in model.Gamma * LOG2],
        "rows": rows,
    }
    return out, True


_DISPATCH = {
    "parisi-min": _parisi_min,
    "duality-check": _duality_check,
    "oracle-max": _oracle_max,
    "simulate": _simulate,
    "counting": _counting,
}


def run(cfg: ExperimentConfig, timestamp: str | None = None) -> tuple[dict, int]:
    """Execute the configured workflow; returns the report and an exit status."""
    report = {
        "schema": SCHEMA,
        "config_hash": cfg.digest(),
        "config": cfg.to_dict(),
        "workflow": cfg.workflow,
        "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    if cfg.workflow in ("simulate", "counting"):
        report["notes"] = [METRIC_NOTE]
    try:
        result, ok = _DISPATCH[cfg.workflow](cfg)
    except ConvergenceError as exc:
        report.update(status="error", error={"code": "no-convergence", "message": str(exc), "residual": exc.residual})
        return report, EXIT_FAILED
    except InvalidInputError as exc:
        code = getattr(exc, "code", "invalid-input")
        report.update(status="error", error={"code": code, "message": str(exc)})
        return report, EXIT_FAILED
    report["result"] = result
    report["status"] = "ok" if ok else "failed"
    return report, EXIT_OK if ok else EXIT_FAILED


def _finite(obj):
    # JSON has no inf/nan; they only appear in diagnostics, so null is enough
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def dumps_report(report: dict) -> str:
    """Canonical JSON; floats use the shortest repr that round-trips exactly."""
    return json.dumps(_finite(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grem-parisi",
        description="Parisi minimisation, constrained Gibbs maximisation and finite-N simulation.",
    )
    sub = parser.add_subparsers(dest="workflow", required=True)
    for name in WORKFLOWS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="YAML or JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--replicas", type=int)
        p.add_argument("--N", dest="N", type=int, action="append", help="repeatable")
        p.add_argument("--radius", type=float)
        p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config.read_text())
        cfg = cfg.with_overrides(
            workflow=args.workflow, seed=args.seed, tol=args.tol,
            replicas=args.replicas, N=args.N, radius=args.radius,
        )
    except ConfigError as exc:
        err = {"schema": SCHEMA, "status": "error", "error": {"code": exc.code, "key": exc.key, "message": str(exc)}}
        print(dumps_report(err), end="", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"grem-parisi: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    report, status = run(cfg)
    text = dumps_report(report)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
        if "csv" in report.get("result", {}):
            args.out.with_suffix(".csv").write_text(report["result"]["csv"])
    return status


if __name__ == "__main__":
    sys.exit(main())
