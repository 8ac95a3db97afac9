"""Score-function gradient estimators with O(d) memory.

All estimators draw their own samples from the factorized Bernoulli at
theta(r) and return a gradient estimate with respect to the underlying
parameters r.  The iterative accumulators follow running-mean recurrences so
memory never scales with the sample count; batch-form helpers operating on
pre-drawn samples are provided for cross-checking and vectorized studies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import Parametrization
from .pbcore import CapacityError, PBFunction, TabularPB, vertex_probs

BSTAR_MAX_D = 10


@dataclass
class GradEstimate:
    """Gradient estimate w.r.t. r plus the mean sampled loss of the draw."""

    values: np.ndarray
    mean_loss: float
    n: int


def sample_bernoulli(theta, rng) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    return (rng.random(theta.shape) < theta).astype(np.float64)


def reinforce(f: PBFunction, r, param: Parametrization, n: int, rng) -> GradEstimate:
    """Plain score-function estimator, accumulated one sample at a time."""
    if n < 1:
        raise ValueError("reinforce requires n >= 1")
    theta = param.theta(r)
    g = 0.0
    jhat = 0.0
    for s in range(1, n + 1):
        z = sample_bernoulli(theta, rng)
        j = f.eval_discrete(z)
        g = ((s - 1) / s) * g + (1.0 / s) * j * param.score(r, z)
        jhat = ((s - 1) / s) * jhat + (1.0 / s) * j
    return GradEstimate(values=np.asarray(g), mean_loss=jhat, n=n)


def _loorf_accumulate(j: float, score: np.ndarray, s: int, jhat, lam_slog, lam_jslog):
    """One step of the leave-one-out running accumulators."""
    jhat = ((s - 1) / s) * jhat + (1.0 / s) * j
    w_old = max(s - 2, 1) / max(s - 1, 1)
    w_new = 1.0 / max(s - 1, 1)
    lam_slog = w_old * lam_slog + w_new * score
    lam_jslog = w_old * lam_jslog + w_new * j * score
    return jhat, lam_slog, lam_jslog


def loorf(f: PBFunction, r, param: Parametrization, n: int, rng) -> GradEstimate:
    """Leave-one-out baselined estimator (each sample baselined by the others).

    Losses are accumulated relative to the first sample; the estimator is
    invariant to constant shifts, and centering makes it return an exact zero
    vector whenever every sampled loss is identical.
    """
    if n < 2:
        raise ValueError("loorf requires n >= 2")
    theta = param.theta(r)
    j0 = None
    jhat, lam_slog, lam_jslog = 0.0, 0.0, 0.0
    for s in range(1, n + 1):
        z = sample_bernoulli(theta, rng)
        j = f.eval_discrete(z)
        if j0 is None:
            j0 = j
        jhat, lam_slog, lam_jslog = _loorf_accumulate(
            j - j0, param.score(r, z), s, jhat, lam_slog, lam_jslog
        )
    g = lam_jslog - lam_slog * jhat
    return GradEstimate(values=np.asarray(g), mean_loss=jhat + j0, n=n)


class DirichletCopula:
    """Iterative sampler of the flat-Dirichlet copula, one dimension per column.

    The total mass per dimension is drawn once as a Gamma(n, 1) (sum of n
    exponentials), then each call to ``next_uniform`` emits the next sample's
    marginally-uniform copula value for every dimension; the final emission
    consumes the remaining mass exactly.
    """

    def __init__(self, d: int, n: int, rng):
        if n < 2:
            raise ValueError("copula sampling requires n >= 2")
        self.d = d
        self.n = n
        self.rng = rng
        total = np.zeros(d)
        for _ in range(n):
            total -= np.log(rng.random(d))
        self.total = total
        self.remainder = total.copy()
        self.emitted = 0

    def next_uniform(self) -> np.ndarray:
        s = self.emitted + 1
        if s > self.n:
            raise RuntimeError("copula exhausted: all n samples already emitted")
        if s < self.n:
            u = self.rng.random(self.d)
            e = -self.remainder * u ** (1.0 / (self.n - s)) + self.remainder
        else:
            e = self.remainder.copy()
        self.remainder = self.remainder - e
        dval = e / self.total
        self.emitted = s
        return 1.0 - (1.0 - dval) ** (self.n - 1)


def arms_correlation(theta, n: int) -> np.ndarray:
    """Pairwise correlation rho_i of the antithetic samples, branching on theta_i."""
    theta = np.asarray(theta, dtype=np.float64)
    hi = np.maximum(0.0, 2.0 * (1.0 - theta) ** (1.0 / (n - 1)) - 1.0) ** (n - 1)
    lo = np.maximum(0.0, 2.0 * theta ** (1.0 / (n - 1)) - 1.0) ** (n - 1)
    q = theta * (1.0 - theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(theta > 0.5, (hi - (1.0 - theta) ** 2) / q, (lo - theta**2) / q)
    return np.where(q == 0.0, 0.0, rho)


def arms_draw(theta, uniforms) -> np.ndarray:
    """Turn copula uniforms into antithetic Bernoulli samples (branch on theta)."""
    return np.where(
        theta > 0.5,
        (uniforms <= theta).astype(np.float64),
        ((1.0 - uniforms) <= theta).astype(np.float64),
    )


def arms(f: PBFunction, r, param: Parametrization, n: int, rng) -> GradEstimate:
    """Antithetic estimator: leave-one-out form on copula samples, scaled by 1/(1-rho)."""
    if n < 2:
        raise ValueError("arms requires n >= 2")
    theta = param.theta(r)
    rho = arms_correlation(theta, n)
    if np.any(rho >= 1.0):
        raise ValueError("arms correlation reached 1; theta must lie inside (0,1)")
    copula = DirichletCopula(theta.size, n, rng)
    j0 = None
    jhat, lam_slog, lam_jslog = 0.0, 0.0, 0.0
    for s in range(1, n + 1):
        z = arms_draw(theta, copula.next_uniform())
        j = f.eval_discrete(z)
        if j0 is None:
            j0 = j
        jhat, lam_slog, lam_jslog = _loorf_accumulate(
            j - j0, param.score(r, z), s, jhat, lam_slog, lam_jslog
        )
    g = lam_jslog - lam_slog * jhat
    scale = 1.0 / (1.0 - rho)
    if param.kind == "escort":
        scale = scale[:, None]
    return GradEstimate(values=np.asarray(g) * scale, mean_loss=jhat + j0, n=n)


def optimal_baselines(f: TabularPB, theta) -> np.ndarray:
    """beta*_i = E[J(z with bit i flipped)] by full enumeration."""
    if f.d > BSTAR_MAX_D:
        raise CapacityError(f"beta* needs full enumeration; d={f.d} > {BSTAR_MAX_D}")
    p = vertex_probs(theta)
    h = np.arange(1 << f.d)
    return np.array([p @ f.table[h ^ (1 << i)] for i in range(f.d)])


def bstar(f: TabularPB, r, param: Parametrization, n: int, rng) -> GradEstimate:
    """Estimator with the variance-optimal per-coordinate constant baseline."""
    if n < 1:
        raise ValueError("bstar requires n >= 1")
    if not isinstance(f, TabularPB):
        raise CapacityError("beta* baselines require a tabular benchmark")
    theta = param.theta(r)
    beta = optimal_baselines(f, theta)
    if param.kind == "escort":
        beta = beta[:, None]
    g = 0.0
    jhat = 0.0
    for s in range(1, n + 1):
        z = sample_bernoulli(theta, rng)
        j = f.eval_discrete(z)
        g = ((s - 1) / s) * g + (1.0 / s) * (j - beta) * param.score(r, z)
        jhat = ((s - 1) / s) * jhat + (1.0 / s) * j
    return GradEstimate(values=np.asarray(g), mean_loss=jhat, n=n)


def straight_through(f: PBFunction, r, param: Parametrization, rng) -> GradEstimate:
    """Biased hybrid: sample z in the forward pass, pass dJ/dz back unchanged."""
    if param.kind != "sigmoid":
        raise ValueError("straight-through is defined for the sigmoid parametrization only")
    f.require_smooth()
    theta = param.theta(r)
    z = sample_bernoulli(theta, rng)
    g = np.asarray(f.grad_smooth(z), dtype=np.float64)
    return GradEstimate(values=g, mean_loss=f.eval_discrete(z), n=1)


ESTIMATORS = {
    "reinforce": reinforce,
    "loorf": loorf,
    "arms": arms,
    "bstar": bstar,
}


# ---------------------------------------------------------------------------
# Batch forms on pre-drawn samples.  These evaluate the direct formulas the
# iterative accumulators must reproduce, and support vectorized statistical
# studies: J has shape (..., n) and scores (..., n) + param-shape.
# ---------------------------------------------------------------------------


def reinforce_from_samples(j_vals, scores) -> np.ndarray:
    j_vals = np.asarray(j_vals, dtype=np.float64)
    naxis = j_vals.ndim - 1
    jb = np.expand_dims(j_vals, tuple(range(naxis + 1, scores.ndim)))
    return np.mean(jb * scores, axis=naxis)


def loorf_from_samples(j_vals, scores) -> np.ndarray:
    j_vals = np.asarray(j_vals, dtype=np.float64)
    n = j_vals.shape[-1]
    if n < 2:
        raise ValueError("loorf requires n >= 2")
    naxis = j_vals.ndim - 1
    centered = j_vals - j_vals.mean(axis=naxis, keepdims=True)
    cb = np.expand_dims(centered, tuple(range(naxis + 1, scores.ndim)))
    return np.sum(cb * scores, axis=naxis) / (n - 1)


def baseline_from_samples(j_vals, scores, beta) -> np.ndarray:
    """Constant-baseline estimator mean((J - beta) * score) over the sample axis."""
    j_vals = np.asarray(j_vals, dtype=np.float64)
    naxis = j_vals.ndim - 1
    jb = np.expand_dims(j_vals, tuple(range(naxis + 1, scores.ndim)))
    return np.mean((jb - beta) * scores, axis=naxis)


def sample_bernoulli_batch(theta, shape, rng) -> np.ndarray:
    """(*shape, d) iid Bernoulli draws."""
    theta = np.asarray(theta, dtype=np.float64)
    return (rng.random(tuple(shape) + theta.shape) < theta).astype(np.float64)


def sample_arms_batch(theta, n: int, reps: int, rng) -> np.ndarray:
    """(reps, n, d) antithetic draws via the batch Dirichlet copula."""
    theta = np.asarray(theta, dtype=np.float64)
    e = -np.log(rng.random((reps, n, theta.size)))
    dval = e / e.sum(axis=1, keepdims=True)
    uniforms = 1.0 - (1.0 - dval) ** (n - 1)
    return arms_draw(theta, uniforms)
