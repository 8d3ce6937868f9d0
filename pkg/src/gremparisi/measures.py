"""Finite probability measures on product supports.

Every space here is a finite set, so a measure is a dense numpy table with one
axis per coordinate.  Entropies use the natural logarithm and the convention
``0 log 0 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, rel_entr

from .errors import InvalidInputError

LOG2 = math.log(2.0)
NORM_TOL = 1e-12
MAX_CELLS = 10**6


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SupportAxis:
    """Labels of the points of one finite coordinate space."""

    labels: tuple

    def __init__(self, labels):
        labels = tuple(labels)
        if len(labels) < 1:
            raise InvalidInputError("a support axis needs at least one point")
        if len(set(labels)) != len(labels):
            raise InvalidInputError(f"support labels must be distinct: {labels!r}")
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return len(self.labels)

    @classmethod
    def range(cls, k: int) -> "SupportAxis":
        return cls(range(k))


def _check_normalized(weights: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(weights)):
        raise InvalidInputError(f"{what}: weights must be finite")
    if np.any(weights < 0):
        raise InvalidInputError(f"{what}: weights must be nonnegative")
    total = float(weights.sum())
    if abs(total - 1.0) > NORM_TOL:
        raise InvalidInputError(f"{what}: weights sum to {total!r}, not 1")


@dataclass(frozen=True, eq=False)
class FiniteMeasure:
    """Probability weights on the product of ``axes``."""

    axes: tuple
    weights: np.ndarray

    def __init__(self, axes: Sequence[SupportAxis], weights):
        axes = tuple(axes)
        w = _frozen(weights)
        shape = tuple(ax.size for ax in axes)
        if w.shape != shape:
            raise InvalidInputError(
                f"weight table has shape {w.shape}, axes require {shape}"
            )
        _check_normalized(w, "FiniteMeasure")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, axes, weights) -> "FiniteMeasure":
        w = np.asarray(weights, dtype=float)
        return cls(axes, w / w.sum())

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return self.weights.shape

    def same_axes(self, other: "FiniteMeasure") -> bool:
        return self.axes == other.axes

    def __repr__(self):
        return f"FiniteMeasure(shape={self.shape}, weights={self.weights.ravel()!r})"


@dataclass(frozen=True, eq=False)
class MarkovKernel:
    """Conditional law of one target coordinate given the source coordinates.

    ``table[x_1, ..., x_{j-1}, :]`` is the row at the source point.  Rows whose
    conditioning mass was zero are marked in ``reachable`` and hold the uniform
    law as a placeholder.
    """

    source_axes: tuple
    target: SupportAxis
    table: np.ndarray
    reachable: np.ndarray

    def __init__(self, source_axes, target, table, reachable=None):
        source_axes = tuple(source_axes)
        t = _frozen(table)
        shape = tuple(ax.size for ax in source_axes) + (target.size,)
        if t.shape != shape:
            raise InvalidInputError(f"kernel table has shape {t.shape}, expected {shape}")
        if np.any(t < 0) or np.any(np.abs(t.sum(axis=-1) - 1.0) > NORM_TOL):
            raise InvalidInputError("kernel rows must be probability vectors")
        if reachable is None:
            reachable = np.ones(shape[:-1], dtype=bool)
        r = np.array(reachable, dtype=bool)
        r.setflags(write=False)
        object.__setattr__(self, "source_axes", source_axes)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "reachable", r)

    def row_entropies(self, reference) -> np.ndarray:
        """H(K(x, .) | reference) for every source point x."""
        ref = np.asarray(reference, dtype=float)
        return rel_entr(self.table, ref).sum(axis=-1)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Depth, branching fractions and level laws of the hierarchy.

    ``gamma[j]`` is the share of the N binary degrees of freedom spent at level
    ``j + 1``; ``levels[j]`` is the support and law of the variables drawn
    there.  All level weights are strictly positive.
    """

    gamma: tuple
    levels: tuple

    def __init__(self, gamma, levels):
        gamma = tuple(float(g) for g in gamma)
        levels = tuple(
            (ax if isinstance(ax, SupportAxis) else SupportAxis(ax), _frozen(w))
            for ax, w in levels
        )
        if len(gamma) == 0 or len(gamma) != len(levels):
            raise InvalidInputError(
                f"need one gamma per level: got {len(gamma)} gammas, {len(levels)} levels"
            )
        if any(not (g > 0) for g in gamma):
            raise InvalidInputError("gamma entries must be positive")
        if abs(math.fsum(gamma) - 1.0) > NORM_TOL:
            raise InvalidInputError(f"gamma must sum to 1, sums to {math.fsum(gamma)!r}")
        cells = 1
        for j, (ax, w) in enumerate(levels, start=1):
            if w.shape != (ax.size,):
                raise InvalidInputError(
                    f"level {j}: {w.shape[0] if w.ndim == 1 else w.shape} weights for {ax.size} points"
                )
            if np.any(w <= 0):
                raise InvalidInputError(f"level {j}: weights must be strictly positive")
            _check_normalized(w, f"level {j}")
            cells *= ax.size
        if cells > MAX_CELLS:
            raise InvalidInputError(f"product support has {cells} cells, cap is {MAX_CELLS}")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "levels", levels)

    @property
    def n(self) -> int:
        return len(self.gamma)

    @property
    def Gamma(self) -> np.ndarray:
        """Prefix sums of gamma; the last entry is 1."""
        return np.cumsum(self.gamma)

    @property
    def axes(self) -> tuple:
        return tuple(ax for ax, _ in self.levels)

    @property
    def shape(self) -> tuple:
        return tuple(ax.size for ax in self.axes)

    def level_weights(self, j: int) -> np.ndarray:
        """Weights of the law at level j (1-based)."""
        return self.levels[j - 1][1]

    def level_measure(self, j: int) -> FiniteMeasure:
        ax, w = self.levels[j - 1]
        return FiniteMeasure([ax], w)

    @property
    def mu(self) -> FiniteMeasure:
        return product_measure([self.level_measure(j) for j in range(1, self.n + 1)])

    def mu_prefix(self, j: int) -> FiniteMeasure:
        """Law of the first j coordinates."""
        return product_measure([self.level_measure(i) for i in range(1, j + 1)])

    def mu_suffix(self, j: int) -> FiniteMeasure:
        """Law of coordinates j+1..n (requires j < n)."""
        return product_measure([self.level_measure(i) for i in range(j + 1, self.n + 1)])


def product_measure(levels: Sequence[FiniteMeasure]) -> FiniteMeasure:
    """Independent coupling of one-dimensional measures."""
    if len(levels) == 0:
        raise InvalidInputError("product of zero measures")
    axes = []
    w = np.ones(())
    for k, lev in enumerate(levels):
        if lev.ndim != 1:
            raise InvalidInputError(f"factor {k + 1} is {lev.ndim}-dimensional, expected 1")
        axes.append(lev.axes[0])
        w = np.multiply.outer(w, lev.weights)
    if w.size > MAX_CELLS:
        raise InvalidInputError(f"product support has {w.size} cells, cap is {MAX_CELLS}")
    return FiniteMeasure(axes, w)


def marginal(nu: FiniteMeasure, j: int) -> FiniteMeasure:
    """Marginal of ``nu`` on its first ``j`` coordinates."""
    if not 1 <= j <= nu.ndim:
        raise InvalidInputError(f"marginal level {j} outside 1..{nu.ndim}")
    w = nu.weights.sum(axis=tuple(range(j, nu.ndim))) if j < nu.ndim else nu.weights
    return FiniteMeasure(nu.axes[:j], w)


def relative_entropy(nu: FiniteMeasure, mu: FiniteMeasure) -> float:
    """H(nu | mu); +inf when nu is not absolutely continuous w.r.t. mu."""
    if not nu.same_axes(mu):
        raise InvalidInputError("relative entropy of measures on different axes")
    return float(rel_entr(nu.weights, mu.weights).sum())


def disintegrate(nu: FiniteMeasure, j: int) -> tuple[FiniteMeasure, MarkovKernel]:
    """Split the law of the first j coordinates into marginal and kernel.

    Returns the marginal on coordinates 1..j-1 and the conditional law of
    coordinate j given them.
    """
    if not 2 <= j <= nu.ndim:
        raise InvalidInputError(f"disintegration level {j} outside 2..{nu.ndim}")
    joint = marginal(nu, j).weights
    head = joint.sum(axis=-1)
    reachable = head > 0
    safe = np.where(reachable, head, 1.0)[..., None]
    k = nu.axes[j - 1].size
    table = np.where(reachable[..., None], joint / safe, 1.0 / k)
    table = table / table.sum(axis=-1, keepdims=True)
    return (
        FiniteMeasure(nu.axes[: j - 1], head),
        MarkovKernel(nu.axes[: j - 1], nu.axes[j - 1], table, reachable),
    )


def compose(head: FiniteMeasure, kernel: MarkovKernel) -> FiniteMeasure:
    """head ⊗ kernel, the inverse of :func:`disintegrate`."""
    if head.axes != kernel.source_axes:
        raise InvalidInputError("kernel source axes do not match the head measure")
    w = head.weights[..., None] * kernel.table
    return FiniteMeasure(head.axes + (kernel.target,), w)


def conditional_relative_entropy(nu: FiniteMeasure, mu: FiniteMeasure, j: int) -> float:
    """Average over x of H(nu(. | x) | mu(. | x)) where x is the first j coordinates.

    Computed row by row from the conditional laws, independently of
    :func:`relative_entropy` on the joint.
    """
    if not nu.same_axes(mu):
        raise InvalidInputError("conditional entropy of measures on different axes")
    if not 1 <= j < nu.ndim:
        raise InvalidInputError(f"split level {j} outside 1..{nu.ndim - 1}")
    head_shape = nu.shape[:j]
    rows_nu = nu.weights.reshape(int(np.prod(head_shape)), -1)
    rows_mu = mu.weights.reshape(rows_nu.shape)
    total = 0.0
    for a, b in zip(rows_nu, rows_mu):
        mass = a.sum()
        if mass == 0:
            continue
        cond_nu = a / mass
        cond_mu = b / b.sum()
        total += mass * float(rel_entr(cond_nu, cond_mu).sum())
    return total


def entropy_dual_gap(nu: FiniteMeasure, mu: FiniteMeasure, u) -> float:
    """H(nu|mu) minus the variational lower bound obtained from test function ``u``.

    Nonnegative for every finite ``u``, and zero at ``u = log(dnu/dmu)``.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != nu.shape:
        raise InvalidInputError(f"test function shape {u.shape} != support shape {nu.shape}")
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("test function must be finite")
    h = relative_entropy(nu, mu)
    if math.isinf(h):
        return math.inf
    bound = float(np.sum(u * nu.weights)) - float(logsumexp(u, b=mu.weights))
    return h - bound


def total_variation(nu: FiniteMeasure, rho: FiniteMeasure) -> float:
    if not nu.same_axes(rho):
        raise InvalidInputError("total variation of measures on different axes")
    return 0.5 * float(np.abs(nu.weights - rho.weights).sum())
