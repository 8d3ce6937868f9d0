"""Experiment configuration: parsing, validation and canonical serialisation.

A config is YAML (JSON also parses) with three sections::

    model:
      gamma: [0.5, 0.5]
      levels:
        - support: [a, b]
          weights: [0.9, 0.1]
        - support: [0, 1, 2]
          weights: [0.2, 0.3, 0.5]
    phi: [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]   # row-major, level 1 varies slowest
    run:
      workflow: duality-check
      tol: 1.0e-10
      N: [8, 12]
      replicas: 20
      seed: 0
      radius: 0.15
      center: null                          # counting only; defaults to mu

``phi`` may also be given as nested lists with the model's shape.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
import yaml

from .errors import InvalidInputError
from .measures import NORM_TOL, ModelSpec, SupportAxis
from .parisi import PhiTable

WORKFLOWS = ("parisi-min", "duality-check", "oracle-max", "simulate", "counting")
SIMULATION_WORKFLOWS = ("simulate", "counting")


class ConfigError(InvalidInputError):
    """A config value failed validation; ``code`` identifies the rule, ``key`` the location."""

    def __init__(self, code: str, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.code = code
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    gamma: tuple
    supports: tuple
    weights: tuple
    phi: tuple
    workflow: str = "duality-check"
    tol: float = 1e-10
    N: tuple = (8, 12, 16)
    replicas: int = 20
    seed: int = 0
    radius: float = 0.15
    center: tuple | None = None

    def model(self) -> ModelSpec:
        return ModelSpec(
            self.gamma,
            [(SupportAxis(s), w) for s, w in zip(self.supports, self.weights)],
        )

    def phi_table(self) -> PhiTable:
        return PhiTable(self.model(), self.phi)

    def to_dict(self) -> dict:
        return {
            "model": {
                "gamma": list(self.gamma),
                "levels": [
                    {"support": list(s), "weights": list(w)}
                    for s, w in zip(self.supports, self.weights)
                ],
            },
            "phi": list(self.phi),
            "run": {
                "workflow": self.workflow,
                "tol": self.tol,
                "N": list(self.N),
                "replicas": self.replicas,
                "seed": self.seed,
                "radius": self.radius,
                "center": None if self.center is None else list(self.center),
            },
        }

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if not kw:
            return self
        merged = self.to_dict()
        merged["run"].update(kw)
        return parse_mapping(merged)


def serialize_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def _num(value, key: str) -> float:
    if isinstance(value, bool):
        raise ConfigError("bad-value", key, f"expected a number, got {value!r}")
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError("bad-value", key, f"expected a number, got {value!r}") from None
    if not math.isfinite(x):
        raise ConfigError("bad-value", key, f"expected a finite number, got {value!r}")
    return x


def _int(value, key: str) -> int:
    x = _num(value, key)
    if x != int(x):
        raise ConfigError("bad-value", key, f"expected an integer, got {value!r}")
    return int(x)


def _require(mapping, name: str, where: str):
    if not isinstance(mapping, dict):
        raise ConfigError("bad-value", where, "expected a mapping")
    if name not in mapping:
        raise ConfigError("missing-key", f"{where}.{name}" if where else name, "required key missing")
    return mapping[name]


def _label(x):
    # YAML may hand back ints, floats or strings; keep them hashable and exact
    return x if isinstance(x, (int, float, str)) else str(x)


def parse_mapping(data) -> ExperimentConfig:
    """Validate an already-decoded config mapping."""
    if not isinstance(data, dict):
        raise ConfigError("bad-value", "<root>", "config must be a mapping")
    model = _require(data, "model", "")
    gamma_raw = _require(model, "gamma", "model")
    if not isinstance(gamma_raw, list) or not gamma_raw:
        raise ConfigError("bad-value", "model.gamma", "expected a nonempty list")
    gamma = tuple(_num(g, f"model.gamma[{i}]") for i, g in enumerate(gamma_raw))
    for i, g in enumerate(gamma):
        if g <= 0:
            raise ConfigError("nonpositive-gamma", f"model.gamma[{i}]", f"must be positive, got {g!r}")
    if abs(math.fsum(gamma) - 1.0) > NORM_TOL:
        raise ConfigError("gamma-sum", "model.gamma", f"gamma must sum to 1 (sums to {math.fsum(gamma)!r})")

    levels_raw = _require(model, "levels", "model")
    if not isinstance(levels_raw, list) or len(levels_raw) != len(gamma):
        raise ConfigError(
            "level-count", "model.levels",
            f"expected {len(gamma)} levels (one per gamma entry)",
        )
    supports, weights = [], []
    for j, lev in enumerate(levels_raw):
        where = f"model.levels[{j}]"
        w_raw = _require(lev, "weights", where)
        if not isinstance(w_raw, list) or not w_raw:
            raise ConfigError("bad-value", f"{where}.weights", "expected a nonempty list")
        w = tuple(_num(x, f"{where}.weights[{i}]") for i, x in enumerate(w_raw))
        for i, x in enumerate(w):
            if x <= 0:
                raise ConfigError(
                    "nonpositive-weight", f"{where}.weights[{i}]",
                    f"weights must be strictly positive, got {x!r}",
                )
        if abs(math.fsum(w) - 1.0) > NORM_TOL:
            raise ConfigError("weight-sum", f"{where}.weights", f"weights must sum to 1 (sums to {math.fsum(w)!r})")
        s_raw = lev.get("support", list(range(len(w))))
        if not isinstance(s_raw, list) or len(s_raw) != len(w):
            raise ConfigError(
                "support-size", f"{where}.support",
                f"{len(s_raw) if isinstance(s_raw, list) else '?'} labels for {len(w)} weights",
            )
        s = tuple(_label(x) for x in s_raw)
        if len(set(s)) != len(s):
            raise ConfigError("bad-value", f"{where}.support", "labels must be distinct")
        supports.append(s)
        weights.append(w)
    shape = tuple(len(w) for w in weights)

    phi_raw = _require(data, "phi", "")
    try:
        phi_arr = np.array(phi_raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("bad-value", "phi", "phi must be a (nested) list of numbers") from None
    expected = int(np.prod(shape))
    if phi_arr.shape not in ((expected,), shape):
        raise ConfigError(
            "phi-shape", "phi",
            f"expected shape {shape} or {expected} flat values, got shape {phi_arr.shape}",
        )
    if not np.all(np.isfinite(phi_arr)):
        raise ConfigError("bad-value", "phi", "phi values must be finite")
    phi = tuple(float(x) for x in phi_arr.ravel())

    run = data.get("run") or {}
    if not isinstance(run, dict):
        raise ConfigError("bad-value", "run", "expected a mapping")
    workflow = run.get("workflow", "duality-check")
    if workflow not in WORKFLOWS:
        raise ConfigError("unknown-workflow", "run.workflow", f"{workflow!r} not in {WORKFLOWS}")
    tol = _num(run.get("tol", 1e-10), "run.tol")
    if tol <= 0:
        raise ConfigError("bad-value", "run.tol", "tol must be positive")
    N_raw = run.get("N", [8, 12, 16])
    N_raw = N_raw if isinstance(N_raw, list) else [N_raw]
    Ns = tuple(_int(x, f"run.N[{i}]") for i, x in enumerate(N_raw))
    for i, N in enumerate(Ns):
        if N < 1:
            raise ConfigError("bad-value", f"run.N[{i}]", "N must be positive")
    replicas = _int(run.get("replicas", 20), "run.replicas")
    if replicas < 1:
        raise ConfigError("bad-value", "run.replicas", "need at least one replica")
    seed = _int(run.get("seed", 0), "run.seed")
    if seed < 0:
        raise ConfigError("bad-value", "run.seed", "seed must be nonnegative")
    radius = _num(run.get("radius", 0.15), "run.radius")
    if radius <= 0:
        raise ConfigError("bad-value", "run.radius", "radius must be positive")
    center = run.get("center")
    if center is not None:
        c = np.array(center, dtype=float).ravel()
        if c.size != expected:
            raise ConfigError("phi-shape", "run.center", f"expected {expected} weights, got {c.size}")
        if np.any(c < 0) or abs(c.sum() - 1.0) > NORM_TOL:
            raise ConfigError("weight-sum", "run.center", "center must be a probability vector")
        center = tuple(float(x) for x in c)

    if workflow in SIMULATION_WORKFLOWS:
        for i, N in enumerate(Ns):
            for j, g in enumerate(gamma):
                if abs(g * N - round(g * N)) > 1e-9:
                    raise ConfigError(
                        "gamma-N", f"run.N[{i}]",
                        f"gamma[{j}] * N = {g * N!r} is not an integer",
                    )

    return ExperimentConfig(
        gamma=gamma,
        supports=tuple(supports),
        weights=tuple(weights),
        phi=phi,
        workflow=workflow,
        tol=tol,
        N=Ns,
        replicas=replicas,
        seed=seed,
        radius=radius,
        center=center,
    )


def parse_config(text: str) -> ExperimentConfig:
    """Parse YAML/JSON config text into a validated :class:`ExperimentConfig`."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("syntax", "<text>", str(exc)) from None
    return parse_mapping(data)


__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "WORKFLOWS",
    "parse_config",
    "parse_mapping",
    "serialize_config",
]
