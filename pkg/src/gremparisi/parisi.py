"""Backward log-moment recursion and the Parisi-type functional.

The functional is minimised in the coordinates ``s_j = 1/m_j``, where it is
strictly convex and the ordered ladder ``0 < m_1 <= ... <= m_n <= 1`` becomes
the polyhedral cone ``s_1 >= ... >= s_n >= 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ConvergenceError, InvalidInputError
from .measures import LOG2, ModelSpec

BLOCK_TOL = 1e-8
M_FLOOR = 1e-8
S_CEIL = 1.0 / M_FLOOR


@dataclass(frozen=True, eq=False)
class PhiTable:
    """A potential on the product support, one value per cell."""

    model: ModelSpec
    values: np.ndarray

    def __init__(self, model: ModelSpec, values):
        v = np.array(values, dtype=float)
        if v.size != int(np.prod(model.shape)):
            raise InvalidInputError(
                f"phi table has {v.size} entries, model support has shape {model.shape}"
            )
        if v.shape != model.shape:
            if v.ndim != 1:
                raise InvalidInputError(
                    f"phi table has shape {v.shape}, expected {model.shape}"
                )
            v = v.reshape(model.shape)
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("phi values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "model", model)
        object.__setattr__(self, "values", v)

    def shifted(self, c: float) -> "PhiTable":
        return PhiTable(self.model, self.values + c)


@dataclass(frozen=True)
class TemperatureLadder:
    """An element of the ordered ladder 0 < m_1 <= ... <= m_n <= 1."""

    m: tuple

    def __init__(self, m):
        m = tuple(float(x) for x in m)
        if len(m) == 0:
            raise InvalidInputError("empty ladder")
        if m[0] <= 0 or any(b < a for a, b in zip(m, m[1:])) or m[-1] > 1:
            raise InvalidInputError(f"ladder {m} is not 0 < m_1 <= ... <= m_n <= 1")
        object.__setattr__(self, "m", m)

    @property
    def n(self) -> int:
        return len(self.m)

    def as_array(self) -> np.ndarray:
        return np.array(self.m)

    @property
    def s(self) -> np.ndarray:
        return 1.0 / np.array(self.m)

    @classmethod
    def from_s(cls, s) -> "TemperatureLadder":
        m = 1.0 / np.asarray(s, dtype=float)
        return cls(np.minimum(m, 1.0))


@dataclass(frozen=True)
class BlockStructure:
    """Maximal runs of equal ladder values.

    ``blocks`` are the runs with value below one (1-based index tuples),
    ``boundaries`` their last indices, and ``terminal`` the run of ones, if any.
    """

    K: int
    boundaries: tuple
    blocks: tuple
    terminal: tuple


@dataclass(frozen=True, eq=False)
class DescentResult:
    """phis[0] is phi_n (the input), phis[-1] is phi_1."""

    phis: tuple
    phi0: float

    def phi(self, j: int) -> np.ndarray:
        """phi_j as a table over the first j coordinates (phi_0 as 0-d array)."""
        n = len(self.phis)
        if j == 0:
            return np.asarray(self.phi0)
        return self.phis[n - j]


@dataclass(frozen=True, eq=False)
class ParisiMinimum:
    ladder: TemperatureLadder
    value: float
    blocks: BlockStructure
    gradient_s: np.ndarray
    residual: float
    iterations: int
    history: list = field(default_factory=list, repr=False)


def _as_m(m, n: int) -> np.ndarray:
    if isinstance(m, TemperatureLadder):
        arr = m.as_array()
    else:
        arr = np.asarray(m, dtype=float).reshape(-1)
    if arr.shape != (n,):
        raise InvalidInputError(f"ladder has {arr.size} entries, model depth is {n}")
    if np.any(~(arr > 0)):
        raise InvalidInputError(f"ladder entries must be positive, got {arr}")
    return arr


def descend_phi(phi: PhiTable, m) -> DescentResult:
    """Run phi_{j-1} = (1/m_j) log E_{mu_j} exp(m_j phi_j) from j = n down to 1."""
    model = phi.model
    m = _as_m(m, model.n)
    cur = phi.values
    phis = [cur]
    for j in range(model.n, 0, -1):
        mj = m[j - 1]
        cur = logsumexp(mj * cur, b=model.level_weights(j), axis=-1) / mj
        phis.append(cur)
    phi0 = float(phis.pop())
    return DescentResult(tuple(phis), phi0)


def parisi_value(phi: PhiTable, m) -> float:
    """sum_i gamma_i log2 / m_i + phi_0(m) - log 2."""
    m = _as_m(m, phi.model.n)
    entropic = LOG2 * float(np.sum(np.array(phi.model.gamma) / m))
    return entropic + descend_phi(phi, m).phi0 - LOG2


def parisi_gradient(phi: PhiTable, m) -> np.ndarray:
    """Exact partial derivatives of :func:`parisi_value` with respect to m.

    Component j is (d_j - gamma_j log 2) / m_j**2, with d_j the averaged
    relative entropy of the j-th kernel of the hierarchical Gibbs measure.
    """
    from .gibbs import build_gibbs, kernel_entropy_profile

    m = _as_m(m, phi.model.n)
    d = kernel_entropy_profile(build_gibbs(phi, m))
    return (d - np.array(phi.model.gamma) * LOG2) / m**2


def parisi_gradient_s(phi: PhiTable, m) -> np.ndarray:
    """Gradient in s = 1/m coordinates: gamma_j log 2 - d_j."""
    m = _as_m(m, phi.model.n)
    return -parisi_gradient(phi, m) * m**2


def detect_blocks(m, tol: float = BLOCK_TOL) -> BlockStructure:
    """Group a ladder into runs of (numerically) equal values."""
    m = m.m if isinstance(m, TemperatureLadder) else tuple(float(x) for x in m)
    runs = []
    for i, v in enumerate(m, start=1):
        if runs and abs(v - m[runs[-1][-1] - 1]) <= tol:
            runs[-1].append(i)
        else:
            runs.append([i])
    terminal: tuple = ()
    if runs and abs(m[runs[-1][-1] - 1] - 1.0) <= tol:
        terminal = tuple(runs.pop())
    blocks = tuple(tuple(r) for r in runs)
    return BlockStructure(
        K=len(blocks),
        boundaries=tuple(b[-1] for b in blocks),
        blocks=blocks,
        terminal=terminal,
    )


def pava_decreasing(y) -> np.ndarray:
    """Least-squares projection of ``y`` onto nonincreasing sequences."""
    y = np.asarray(y, dtype=float)
    means: list[float] = []
    counts: list[int] = []
    for v in y:
        means.append(float(v))
        counts.append(1)
        while len(means) > 1 and means[-2] < means[-1]:
            c = counts[-2] + counts[-1]
            mu = (means[-2] * counts[-2] + means[-1] * counts[-1]) / c
            means[-2:] = [mu]
            counts[-2:] = [c]
    return np.repeat(means, counts)


def project_cone(y, lower: float = 1.0, upper: float = S_CEIL) -> np.ndarray:
    """Project onto {s_1 >= ... >= s_n >= lower}, then cap at ``upper``.

    Clipping the isotonic fit from below gives the exact projection for a
    common lower bound.
    """
    return np.clip(pava_decreasing(y), lower, upper)


class _Objective:
    def __init__(self, phi: PhiTable):
        self.phi = phi
        self.gamma_log2 = np.array(phi.model.gamma) * LOG2
        self.evals = 0

    def __call__(self, s: np.ndarray) -> tuple[float, np.ndarray]:
        from .gibbs import build_gibbs, kernel_entropy_profile

        self.evals += 1
        m = 1.0 / s
        G = build_gibbs(self.phi, m)
        f = float(self.gamma_log2 @ s) + G.descent.phi0 - LOG2
        g = self.gamma_log2 - kernel_entropy_profile(G)
        return f, g


def _residual(s, g) -> float:
    return float(np.max(np.abs(project_cone(s - g) - s)))


def _faces(s: np.ndarray):
    """Free groups of equal coordinates (coordinates pinned at 1 are dropped)."""
    groups = []
    for i, v in enumerate(s):
        if groups and s[groups[-1][-1]] == v:
            groups[-1].append(i)
        else:
            groups.append([i])
    return [g for g in groups if s[g[0]] > 1.0]


def _newton_polish(obj, s, g, tol, steps=25):
    """Newton iterations restricted to the face containing ``s``."""
    best_s, best_g, best_r = s, g, _residual(s, g)
    faces = _faces(s)
    if not faces:
        return best_s, best_g, best_r
    E = np.zeros((len(s), len(faces)))
    for b, idx in enumerate(faces):
        E[idx, b] = 1.0
    cur_s, cur_g = s, g
    for _ in range(steps):
        rg = E.T @ cur_g
        t = np.array([cur_s[idx[0]] for idx in faces])
        H = np.empty((len(faces), len(faces)))
        for b in range(len(faces)):
            h = 1e-5 * max(1.0, t[b])
            _, gp = obj(cur_s + h * E[:, b])
            _, gm = obj(cur_s - h * E[:, b])
            H[:, b] = E.T @ (gp - gm) / (2 * h)
        H = 0.5 * (H + H.T)
        try:
            step = np.linalg.solve(H, rg)
        except np.linalg.LinAlgError:
            break
        trial = project_cone(cur_s - E @ step)
        _, trial_g = obj(trial)
        r = _residual(trial, trial_g)
        if not np.isfinite(r) or r >= best_r:
            break
        best_s, best_g, best_r = trial, trial_g, r
        cur_s, cur_g = trial, trial_g
        if r <= tol:
            break
    return best_s, best_g, best_r


def minimize_parisi(
    phi: PhiTable,
    tol: float = 1e-10,
    max_iter: int = 5000,
    polish_below: float = 1e-6,
) -> ParisiMinimum:
    """Minimise the functional over the ladder.

    Spectral projected gradient in s = 1/m with nonmonotone Armijo
    backtracking; once the projected-gradient residual drops below
    ``polish_below`` a Newton step on the identified face is tried.  Stops when
    ``max |P(s - grad) - s| <= tol``.
    """
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    obj = _Objective(phi)
    n = phi.model.n
    s = np.ones(n)
    f, g = obj(s)
    r = _residual(s, g)
    recent = [f]
    alpha = 1.0
    history = [(0, f, r)]
    it = 0
    while r > tol:
        if it >= max_iter:
            raise ConvergenceError(
                f"Parisi minimisation stalled at residual {r:.3e} after {it} iterations",
                last_iterate=TemperatureLadder.from_s(s),
                residual=r,
            )
        it += 1
        if r < polish_below:
            s_p, g_p, r_p = _newton_polish(obj, s, g, tol)
            if r_p < r:
                s, g, r = s_p, g_p, r_p
                f, _ = obj(s)
                recent.append(f)
                history.append((it, f, r))
                if r <= tol:
                    break
        d = project_cone(s - alpha * g) - s
        gd = float(g @ d)
        fref = max(recent[-10:])
        t = 1.0
        while True:
            s_new = project_cone(s + t * d)
            f_new, g_new = obj(s_new)
            if f_new <= fref + 1e-4 * t * gd or t < 1e-14:
                break
            t *= 0.5
        ds, dg = s_new - s, g_new - g
        sy = float(ds @ dg)
        alpha = float(ds @ ds) / sy if sy > 0 else 1e3
        alpha = min(max(alpha, 1e-10), 1e10)
        s, f, g = s_new, f_new, g_new
        r = _residual(s, g)
        recent.append(f)
        history.append((it, f, r))

    ladder = TemperatureLadder.from_s(s)
    value = parisi_value(phi, ladder)
    return ParisiMinimum(
        ladder=ladder,
        value=value,
        blocks=detect_blocks(ladder),
        gradient_s=g,
        residual=r,
        iterations=it,
        history=history,
    )


def replica_symmetric_value(phi: PhiTable) -> float:
    """log of the mu-average of e^phi, the annealed value."""
    return float(logsumexp(phi.values, b=phi.model.mu.weights))


__all__ = [
    "BLOCK_TOL",
    "BlockStructure",
    "DescentResult",
    "ParisiMinimum",
    "PhiTable",
    "TemperatureLadder",
    "descend_phi",
    "detect_blocks",
    "minimize_parisi",
    "pava_decreasing",
    "parisi_gradient",
    "parisi_gradient_s",
    "parisi_value",
    "project_cone",
    "replica_symmetric_value",
]
