"""Finite-N realisations of the hierarchical perceptron model.

A configuration alpha = (alpha_1, ..., alpha_n) has 2**(gamma_j N) choices at
level j, so there are 2**N leaves.  The level-j variable X^j at tree node
alpha^(j) and site i is regenerated on demand from a counter-based stream
keyed by (seed, replica, level); nothing is stored, and leaves sharing a
prefix see the same upper-level values by construction.

Indices alpha_j are 0-based here.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import logsumexp

from ._rng import inverse_cdf, stream_key, uniform, uniform_nb
from .errors import InvalidInputError
from .measures import LOG2, FiniteMeasure, ModelSpec
from .parisi import PhiTable, minimize_parisi, replica_symmetric_value

MAX_LEAVES = 2**24
CHUNK = 2**18
TV_EPS = 1e-12


@dataclass(frozen=True)
class SimulationPlan:
    model: ModelSpec
    N: int
    seed: int = 0
    replicas: int = 1
    max_leaves: int = MAX_LEAVES

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidInputError(f"N must be a positive integer, got {self.N!r}")
        if self.replicas < 1:
            raise InvalidInputError("need at least one replica")
        for j, g in enumerate(self.model.gamma, start=1):
            b = g * self.N
            if abs(b - round(b)) > 1e-9:
                raise InvalidInputError(
                    f"gamma_{j} * N = {b!r} is not an integer (N = {self.N})"
                )
        if 2**self.N > self.max_leaves:
            raise InvalidInputError(
                f"2^{self.N} configurations exceed the enumeration cap {self.max_leaves}"
            )

    @property
    def bits(self) -> tuple:
        """Number of binary digits spent at each level (gamma_j N)."""
        return tuple(int(round(g * self.N)) for g in self.model.gamma)

    @property
    def shifts(self) -> np.ndarray:
        """Right shift taking a leaf index to its level-j node index."""
        return self.N - np.cumsum(self.bits)

    def sample(self, replica: int = 0) -> "DisorderSample":
        return DisorderSample(self, replica)


class DisorderSample:
    """One disorder realisation, queried lazily."""

    def __init__(self, plan: SimulationPlan, replica: int = 0):
        if replica < 0:
            raise InvalidInputError("replica index must be nonnegative")
        self.plan = plan
        self.replica = replica
        model = plan.model
        self.keys = np.array(
            [stream_key(plan.seed, replica, j) for j in range(1, model.n + 1)],
            dtype=np.uint64,
        )
        k_max = max(model.shape)
        cdfs = np.ones((model.n, k_max))
        for j in range(model.n):
            c = np.cumsum(model.level_weights(j + 1))
            cdfs[j, : len(c)] = c
            cdfs[j, len(c) - 1 :] = 1.0
        self.cdfs = cdfs
        self.ks = np.array(model.shape, dtype=np.int64)
        self.strides = np.array(
            [int(np.prod(model.shape[j + 1 :])) for j in range(model.n)], dtype=np.int64
        )

    @property
    def model(self) -> ModelSpec:
        return self.plan.model

    @property
    def N(self) -> int:
        return self.plan.N

    def _check_path(self, path) -> tuple:
        path = tuple(int(a) for a in path)
        bits = self.plan.bits
        if len(path) > len(bits):
            raise InvalidInputError(f"path of length {len(path)} deeper than the tree")
        for j, (a, b) in enumerate(zip(path, bits), start=1):
            if not 0 <= a < 2**b:
                raise InvalidInputError(f"alpha_{j} = {a} outside 0..{2**b - 1}")
        return path

    def node_index(self, path) -> int:
        """Global index of the node alpha^(j) among all nodes of its level."""
        path = self._check_path(path)
        idx = 0
        for a, b in zip(path, self.plan.bits):
            idx = (idx << b) | a
        return idx

    def value(self, level: int, path, i: int) -> int:
        """Support index of X^level at node ``path`` (length >= level) and site i."""
        if not 1 <= level <= self.model.n:
            raise InvalidInputError(f"level {level} outside 1..{self.model.n}")
        if not 0 <= i < self.N:
            raise InvalidInputError(f"site {i} outside 0..{self.N - 1}")
        path = self._check_path(path)
        if len(path) < level:
            raise InvalidInputError(f"level {level} needs a path of length >= {level}")
        node = self.node_index(path[:level])
        u = uniform(int(self.keys[level - 1]), node * self.N + i)
        cdf = self.cdfs[level - 1]
        k = int(self.ks[level - 1])
        for idx in range(k - 1):
            if u < cdf[idx]:
                return idx
        return k - 1

    def point(self, alpha, i: int) -> tuple:
        """X_{alpha, i} as a tuple of support indices."""
        alpha = self._check_path(alpha)
        if len(alpha) != self.model.n:
            raise InvalidInputError(f"alpha must have {self.model.n} entries")
        return tuple(self.value(j, alpha, i) for j in range(1, self.model.n + 1))

    def leaf_index(self, alpha) -> int:
        alpha = self._check_path(alpha)
        if len(alpha) != self.model.n:
            raise InvalidInputError(f"alpha must have {self.model.n} entries")
        return self.node_index(alpha)

    def leaf_energies(self, phi: PhiTable, start: int = 0, count: int | None = None) -> np.ndarray:
        """sum_i phi(X_{alpha,i}) for leaves start..start+count-1."""
        total = 2**self.N
        count = total - start if count is None else count
        out = np.empty(count)
        _leaf_energies(
            self.keys, self.plan.shifts.astype(np.int64), self.N, self.cdfs, self.ks,
            self.strides, np.ascontiguousarray(phi.values.ravel()), start, count, out,
        )
        return out


@njit(cache=True)
def _leaf_energies(keys, shifts, N, cdfs, ks, strides, phi_flat, start, count, out):
    n = keys.shape[0]
    for t in range(count):
        leaf = start + t
        e = 0.0
        for i in range(N):
            flat = 0
            for j in range(n):
                node = leaf >> shifts[j]
                u = uniform_nb(keys[j], node * N + i)
                flat += inverse_cdf(cdfs[j], ks[j], u) * strides[j]
            e += phi_flat[flat]
        out[t] = e


@njit(cache=True)
def _count_close(keys, shifts, N, cdfs, ks, strides, center, radius, start, count):
    n = keys.shape[0]
    cells = center.shape[0]
    hist = np.zeros(cells, dtype=np.int64)
    hits = 0
    for t in range(count):
        leaf = start + t
        hist[:] = 0
        for i in range(N):
            flat = 0
            for j in range(n):
                node = leaf >> shifts[j]
                u = uniform_nb(keys[j], node * N + i)
                flat += inverse_cdf(cdfs[j], ks[j], u) * strides[j]
            hist[flat] += 1
        tv = 0.0
        for c in range(cells):
            tv += abs(hist[c] / N - center[c])
        if 0.5 * tv <= radius:
            hits += 1
    return hits


def _check_phi(plan: SimulationPlan, phi: PhiTable) -> None:
    if phi.model.shape != plan.model.shape:
        raise InvalidInputError("phi table does not match the simulated model")


def quenched_free_energy(plan: SimulationPlan, phi: PhiTable, replica: int = 0) -> float:
    """(1/N) log sum_alpha exp(sum_i phi(X_{alpha,i})) for one disorder realisation."""
    _check_phi(plan, phi)
    sample = DisorderSample(plan, replica)
    total = 2**plan.N
    acc = -math.inf
    for start in range(0, total, CHUNK):
        e = sample.leaf_energies(phi, start, min(CHUNK, total - start))
        acc = float(np.logaddexp(acc, logsumexp(e)))
    return acc / plan.N


def empirical_measure(sample: DisorderSample, alpha) -> FiniteMeasure:
    """L_{N,alpha}: the empirical law of X_{alpha,1..N} on the product support."""
    counts = np.zeros(sample.model.shape)
    for i in range(sample.N):
        counts[sample.point(alpha, i)] += 1
    return FiniteMeasure(sample.model.axes, counts / sample.N)


def count_in_neighborhood(sample: DisorderSample, center: FiniteMeasure, r: float) -> int:
    """Number of alpha whose empirical law is within total variation r of ``center``."""
    if not r > 0:
        raise InvalidInputError("radius must be positive")
    if center.shape != sample.model.shape:
        raise InvalidInputError("center lives on a different support")
    plan = sample.plan
    total = 2**plan.N
    hits = 0
    c = np.ascontiguousarray(center.weights.ravel())
    for start in range(0, total, CHUNK):
        hits += _count_close(
            sample.keys, plan.shifts.astype(np.int64), plan.N, sample.cdfs, sample.ks,
            sample.strides, c, r + TV_EPS, start, min(CHUNK, total - start),
        )
    return int(hits)


@dataclass(frozen=True)
class FreeEnergyRow:
    N: int
    mean: float
    stderr: float
    target: float
    annealed: float
    replicas: int
    seed: int

    @property
    def error(self) -> float:
        return abs(self.mean - self.target)


@dataclass(frozen=True)
class FreeEnergyTable:
    rows: tuple

    COLUMNS = ("N", "mean", "stderr", "target", "annealed", "replicas", "seed")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for row in self.rows:
            w.writerow([repr(getattr(row, c)) for c in self.COLUMNS])
        return buf.getvalue()

    def as_dicts(self) -> list:
        return [{c: getattr(row, c) for c in self.COLUMNS} for row in self.rows]


def replica_free_energies(plan: SimulationPlan, phi: PhiTable) -> np.ndarray:
    return np.array([quenched_free_energy(plan, phi, r) for r in range(plan.replicas)])


def run_convergence_study(
    phi: PhiTable,
    Ns,
    replicas: int,
    seed: int = 0,
    target: float | None = None,
) -> FreeEnergyTable:
    """Replica means of the finite-N free energy against J*(phi) + log 2."""
    model = phi.model
    plans = [SimulationPlan(model, int(N), seed, replicas) for N in sorted(Ns)]
    if target is None:
        target = minimize_parisi(phi).value + LOG2
    annealed = LOG2 + replica_symmetric_value(phi)
    rows = []
    for plan in plans:
        f = replica_free_energies(plan, phi)
        stderr = float(f.std(ddof=1) / math.sqrt(len(f))) if len(f) > 1 else 0.0
        rows.append(
            FreeEnergyRow(plan.N, float(f.mean()), stderr, float(target), annealed, replicas, seed)
        )
    return FreeEnergyTable(tuple(rows))
