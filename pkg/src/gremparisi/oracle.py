"""Direct maximisation of the Gibbs functional under the prefix-entropy constraints.

This route never touches the Parisi recursion: it works on the full simplex
over the product support with an augmented Lagrangian, solving each inner
problem by entropic mirror ascent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConvergenceError, InvalidInputError
from .measures import LOG2, FiniteMeasure, ModelSpec, relative_entropy
from .gibbs import constraint_slacks, gibbs_value
from .parisi import PhiTable


@dataclass(frozen=True)
class FeasibleSet:
    """Measures whose j-th prefix marginal has entropy at most Gamma_j log 2."""

    model: ModelSpec
    tol: float = 0.0

    def __contains__(self, nu: FiniteMeasure) -> bool:
        return constraint_slacks(nu, self.model).feasible(self.tol)


@dataclass(frozen=True, eq=False)
class OracleSolution:
    nu: FiniteMeasure
    value: float
    active: tuple
    multipliers: np.ndarray
    slacks: tuple
    iterations: int
    residual: float
    restoration: float


def rate_function(nu: FiniteMeasure, model: ModelSpec) -> float:
    """H(nu | mu) on the feasible set, +inf outside (no tolerance)."""
    if not constraint_slacks(nu, model).feasible(0.0):
        return math.inf
    return relative_entropy(nu, model.mu)


class _Problem:
    """Vectorised pieces of the augmented Lagrangian on log-weights."""

    def __init__(self, phi: PhiTable):
        model = phi.model
        self.model = model
        self.shape = model.shape
        self.n = model.n
        self.phi = phi.values
        self.log_mu = np.log(model.mu.weights)
        # kept with trailing singleton axes so they broadcast like prefix_logs
        self.log_mu_prefix = [
            np.log(model.mu_prefix(j).weights).reshape(self.shape[:j] + (1,) * (self.n - j))
            for j in range(1, self.n + 1)
        ]
        self.bounds = model.Gamma * LOG2

    def prefix_logs(self, logw):
        """log nu^(j) for j = 1..n, each broadcastable to the full shape."""
        out = []
        for j in range(1, self.n + 1):
            axes = tuple(range(j, self.n))
            lj = logsumexp(logw, axis=axes, keepdims=True) if axes else logw
            out.append(lj)
        return out

    def constraints(self, logw, plogs=None):
        plogs = plogs if plogs is not None else self.prefix_logs(logw)
        c = np.empty(self.n)
        for j, lj in enumerate(plogs):
            wj = np.exp(lj)
            c[j] = float(np.sum(wj * (lj - self.log_mu_prefix[j])))
        return c - self.bounds

    def evaluate(self, logw, lam, rho):
        """Augmented objective, its gradient in nu, and the raw constraints."""
        w = np.exp(logw)
        plogs = self.prefix_logs(logw)
        c = self.constraints(logw, plogs)
        eff = np.maximum(0.0, lam + rho * c)
        rel = logw - self.log_mu
        value = float(np.sum(self.phi * w) - np.sum(w * rel))
        value -= float(np.sum(eff**2 - lam**2)) / (2.0 * rho)
        grad = self.phi - rel
        for j, lj in enumerate(plogs):
            if eff[j] > 0:
                grad = grad - eff[j] * (lj - self.log_mu_prefix[j])
        return value, grad, c, eff


def _mirror_inner(prob, logw, lam, rho, eta, tol, max_steps):
    """Entropic mirror ascent with a gradient-only relative-smoothness test.

    A step of size eta is accepted when the symmetrised Bregman divergence of
    the objective is at most (1/eta) times that of the entropy; the test never
    subtracts nearly equal objective values, so it stays meaningful close to
    the optimum.
    """
    value, grad, c, eff = prob.evaluate(logw, lam, rho)
    steps = 0
    res = math.inf
    while steps < max_steps:
        w = np.exp(logw)
        centred = grad - float(np.sum(w * grad))
        res = float(np.max(np.abs(centred)))
        if res <= tol:
            break
        while True:
            trial = logw + eta * centred
            trial = trial - logsumexp(trial)
            t_value, t_grad, t_c, t_eff = prob.evaluate(trial, lam, rho)
            dw = np.exp(trial) - w
            curvature = -float(np.sum((t_grad - grad) * dw))
            sym_kl = float(np.sum(dw * (trial - logw)))
            if curvature <= sym_kl / eta or eta < 1e-12:
                break
            eta *= 0.5
        logw, value, grad, c, eff = trial, t_value, t_grad, t_c, t_eff
        eta = min(eta * 1.25, 1.0)
        steps += 1
    return logw, c, eff, eta, steps, res


def _restore(logw, prob):
    """Smallest mix with mu that makes every constraint hold exactly."""
    w = np.exp(logw)
    mu = np.exp(prob.log_mu)

    def worst(lmb):
        mix = (1 - lmb) * w + lmb * mu
        return float(np.max(prob.constraints(np.log(mix))))

    if worst(0.0) <= 0:
        return w, 0.0
    lo, hi = 0.0, 1e-12
    while worst(hi) > 0:
        lo, hi = hi, hi * 2
        if hi >= 1:
            hi = 1.0
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if worst(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16:
            break
    return (1 - hi) * w + hi * mu, hi


def maximize_gibbs_constrained(
    phi: PhiTable,
    model: ModelSpec | None = None,
    tol: float = 1e-10,
    rho: float = 10.0,
    rho_max: float = 1e6,
    max_outer: int = 500,
    max_inner: int = 5000,
    active_tol: float = 1e-6,
) -> OracleSolution:
    """Supremum of int phi dnu - H(nu|mu) over the feasible set.

    Augmented Lagrangian with multiplier update ``lam <- max(0, lam + rho c)``
    (rho grows tenfold whenever the violation fails to shrink fourfold),
    inner problems solved by entropic mirror ascent started at the previous
    iterate (the first one at mu).  The final iterate is mixed with mu just
    enough to satisfy every constraint exactly.
    """
    model = model if model is not None else phi.model
    if model is not phi.model and (model.shape != phi.model.shape or model.gamma != phi.model.gamma):
        raise InvalidInputError("phi table belongs to a different model")
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    prob = _Problem(PhiTable(model, phi.values))
    logw = prob.log_mu.copy()
    lam = np.zeros(model.n)
    eta = 1.0
    total = 0
    inner_tol = max(tol * 1e-2, 1e-13)
    kkt = math.inf
    prev_feas = math.inf
    for outer in range(max_outer):
        logw, c, eff, eta, steps, res = _mirror_inner(
            prob, logw, lam, rho, eta, inner_tol, max_inner
        )
        total += steps
        feas = float(np.max(np.abs(np.maximum(c, -lam / rho))))
        kkt = max(feas, res)
        lam = eff
        if kkt <= tol:
            break
        # slow multiplier progress means the dual is badly scaled: stiffen the penalty
        if feas > 0.25 * prev_feas and rho < rho_max:
            rho *= 10.0
        prev_feas = feas
    else:
        raise ConvergenceError(
            f"oracle did not reach KKT residual {tol:.1e} (last {kkt:.3e})",
            last_iterate=FiniteMeasure.normalized(model.axes, np.exp(logw)),
            residual=kkt,
        )
    w, lmb = _restore(logw, prob)
    nu = FiniteMeasure.normalized(model.axes, w)
    report = constraint_slacks(nu, model, tight_tol=active_tol)
    return OracleSolution(
        nu=nu,
        value=gibbs_value(PhiTable(model, phi.values), nu),
        active=report.tight,
        multipliers=lam,
        slacks=report.slacks,
        iterations=total,
        residual=kkt,
        restoration=lmb,
    )


def _simplex_grid(dim: int, step: float):
    """Points of the (dim-1)-simplex with coordinates on multiples of ``step``."""
    k = int(round(1.0 / step))
    pts = [c for c in itertools.product(range(k + 1), repeat=dim - 1) if sum(c) <= k]
    arr = np.array(pts, dtype=float).reshape(len(pts), dim - 1) / k
    return np.hstack([arr, 1.0 - arr.sum(axis=1, keepdims=True)])


def _batch_values(phi: PhiTable, W: np.ndarray):
    """Gibbs value and feasibility for a batch of flat weight vectors."""
    model = phi.model
    mu = model.mu.weights.ravel()
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(W > 0, W * np.log(W / mu), 0.0).sum(axis=1)
        feasible = np.ones(len(W), dtype=bool)
        for j in range(1, model.n + 1):
            Wj = W.reshape((len(W),) + model.shape).sum(axis=tuple(range(j + 1, model.n + 1)))
            Wj = Wj.reshape(len(W), -1)
            muj = model.mu_prefix(j).weights.ravel()
            hj = np.where(Wj > 0, Wj * np.log(Wj / muj), 0.0).sum(axis=1)
            feasible &= hj <= model.Gamma[j - 1] * LOG2
    values = W @ phi.values.ravel() - ent
    return values, feasible


def bruteforce_max(phi: PhiTable, model: ModelSpec | None = None, grid: float = 1e-5) -> float:
    """Grid search over the simplex with zooming refinement (tiny supports only)."""
    model = model if model is not None else phi.model
    size = int(np.prod(model.shape))
    if size > 4 or model.n > 2:
        raise InvalidInputError("brute force is limited to n <= 2 and at most 4 support cells")
    phi = PhiTable(model, phi.values)
    if size == 1:
        return float(phi.values.ravel()[0])
    coarse = 0.01 if size <= 3 else 0.02
    W = _simplex_grid(size, coarse)
    values, feasible = _batch_values(phi, W)
    # mu is always feasible, so the candidate set is never empty
    W = np.vstack([W, model.mu.weights.ravel()])
    values = np.append(values, gibbs_value(phi, model.mu))
    feasible = np.append(feasible, True)
    best = int(np.argmax(np.where(feasible, values, -np.inf)))
    x, fx = W[best], values[best]
    radius = coarse
    rng = np.random.default_rng(0)
    while radius > grid:
        offsets = np.array(list(itertools.product(np.linspace(-radius, radius, 9), repeat=size - 1)))
        offsets = np.vstack([offsets, rng.uniform(-radius, radius, (400, size - 1))])
        head = x[:-1] + offsets
        cand = np.hstack([head, 1.0 - head.sum(axis=1, keepdims=True)])
        cand = cand[np.all(cand >= 0, axis=1)]
        vals, feas = _batch_values(phi, cand)
        vals = np.where(feas, vals, -np.inf)
        i = int(np.argmax(vals))
        if vals[i] > fx:
            x, fx = cand[i], vals[i]
        else:
            radius *= 0.5
    return float(fx)
