"""Exact and Monte Carlo estimator-variance computation.

For iid estimators the second moment E[g_hat^2] is computed exactly by
enumerating unordered sample multisets, weighting each by its multinomial
permutation count times its product probability.  The antithetic estimator
uses hard-coded closed-form joint probabilities of the copula samples
(tabulated piecewise cubics for n=4).  Variances are taken in theta-space
(direct-parametrization scores); chain-rule scaling maps them to any other
parametrization.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from . import estimators as est
from .pbcore import CapacityError, TabularPB, all_vertices, entropy, exact_gradient, vertex_probs

MAX_MULTISETS = 10**6


def multiset_count(alphabet: int, n: int) -> int:
    """Number of size-n multisets over an alphabet: C(alphabet - 1 + n, n)."""
    return math.comb(alphabet - 1 + n, n)


def multiset_table(alphabet: int, n: int) -> np.ndarray:
    """(K, alphabet) multiplicity matrix, one row per multiset, K = multiset_count."""
    count = multiset_count(alphabet, n)
    if count > MAX_MULTISETS:
        raise CapacityError(f"{count} multisets exceeds the {MAX_MULTISETS} enumeration guard")
    rows = np.empty((count, alphabet), dtype=np.int64)
    for k, combo in enumerate(itertools.combinations_with_replacement(range(alphabet), n)):
        rows[k] = np.bincount(combo, minlength=alphabet)
    return rows


def permutation_counts(multiplicities: np.ndarray) -> np.ndarray:
    """n! / prod(m_h!) for each multiset row."""
    n = int(multiplicities[0].sum())
    fact = np.array([math.factorial(k) for k in range(n + 1)], dtype=np.float64)
    return math.factorial(n) / np.prod(fact[multiplicities], axis=1)


def theta_scores(theta) -> np.ndarray:
    """(2^d, d) matrix of d log p(zeta_h) / d theta_i."""
    theta = np.asarray(theta, dtype=np.float64)
    Z = all_vertices(theta.size)
    return (Z - theta) / (theta * (1.0 - theta))


def flip_baselines(table: np.ndarray, theta) -> np.ndarray:
    """Optimal constant baselines: expected loss with coordinate i flipped."""
    d = int(np.asarray(theta).size)
    p = vertex_probs(theta)
    h = np.arange(1 << d)
    return np.array([p @ table[h ^ (1 << i)] for i in range(d)])


def estimates_on_multisets(multiplicities, table, theta, estimator: str,
                           beta=None, rho=None) -> np.ndarray:
    """(K, d) theta-space gradient estimates, one per sample multiset."""
    m = multiplicities.astype(np.float64)
    n = int(round(m[0].sum()))
    scores = theta_scores(theta)
    j_s = table[:, None] * scores
    if estimator == "reinforce":
        return (m @ j_s) / n
    if estimator == "loorf":
        jbar = (m @ table) / n
        return ((m @ j_s) - jbar[:, None] * (m @ scores)) / (n - 1)
    if estimator == "bstar":
        beta = flip_baselines(table, theta)
        estimator = "baseline"
    if estimator == "baseline":
        return ((m @ j_s) - (m @ scores) * np.asarray(beta)[None, :]) / n
    if estimator == "arms":
        loorf = estimates_on_multisets(multiplicities, table, theta, "loorf")
        return loorf / (1.0 - np.asarray(rho))[None, :]
    raise ValueError(f"unknown estimator {estimator!r}")


def iid_multiset_probs(multiplicities, theta) -> np.ndarray:
    """Probability of each unordered multiset under iid vertex sampling."""
    p = np.clip(vertex_probs(theta), 1e-300, None)
    return permutation_counts(multiplicities) * np.exp(multiplicities @ np.log(p))


def exact_variance_iid(f: TabularPB, estimator: str, theta, n: int, beta=None):
    """Exact per-coordinate variance (and sum) of an iid-sampling estimator."""
    if multiset_count(1 << f.d, n) > MAX_MULTISETS:
        raise CapacityError("multiset enumeration too large; use mc_variance instead")
    m = multiset_table(1 << f.d, n)
    probs = iid_multiset_probs(m, theta)
    g = estimates_on_multisets(m, f.table, theta, estimator, beta=beta)
    second = probs @ (g * g)
    var = second - exact_gradient(f, theta) ** 2
    return var, float(var.sum())


# ---------------------------------------------------------------------------
# Closed-form joint probabilities of the antithetic copula samples (n = 4).
#
# The tabulated piecewise cubics give the probability of one ordered scalar
# 4-tuple with k ones, as a function of the cutoff on the Dirichlet scale.
# At Bernoulli parameter theta the cutoff is F^{-1}(theta') with
# F^{-1}(p) = 1 - (1-p)^{1/(n-1)}; for theta <= 0.5 the sampler uses the
# reflected copula, which flips the tuple and replaces theta by 1 - theta.
# ---------------------------------------------------------------------------

ARMS_TABULATED_N = 4


def table5_polynomial(k_ones: int, t: float) -> float:
    """Raw tabulated piecewise cubic for an ordered 4-tuple with k ones, argument t."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("argument must lie in [0, 1]")
    if k_ones == 0:
        return -((4 * t - 1) ** 3) if t < 0.25 else 0.0
    if k_ones == 1:
        if t < 0.25:
            return t * (37 * t**2 - 21 * t + 3)
        return -((3 * t - 1) ** 3) if t < 1 / 3 else 0.0
    if k_ones == 2:
        if t < 0.25:
            return 6 * (1 - 3 * t) * t**2
        if t < 1 / 3:
            return 46 * t**3 - 42 * t**2 + 12 * t - 1
        return -((2 * t - 1) ** 3) if t < 0.5 else 0.0
    if k_ones == 3:
        if t < 0.25:
            return 6 * t**3
        if t < 1 / 3:
            return -58 * t**3 + 48 * t**2 - 12 * t + 1
        if t < 0.5:
            return 23 * t**3 - 33 * t**2 + 15 * t - 2
        return -((t - 1) ** 3)
    if k_ones == 4:
        if t < 0.25:
            return 0.0
        if t < 1 / 3:
            return (4 * t - 1) ** 3
        if t < 0.5:
            return -44 * t**3 + 60 * t**2 - 24 * t + 3
        return 4 * t**3 - 12 * t**2 + 12 * t - 3
    raise ValueError("k_ones must lie in 0..4")


def dirichlet_cutoff(p: float, n: int) -> float:
    """Inverse marginal CDF of one flat-Dirichlet coordinate: 1 - (1-p)^(1/(n-1))."""
    return 1.0 - (1.0 - p) ** (1.0 / (n - 1))


def arms_tuple_probs(theta_i: float, n: int = ARMS_TABULATED_N) -> np.ndarray:
    """Ordered-tuple probabilities by ones-count k=0..n at Bernoulli parameter theta_i."""
    if n != ARMS_TABULATED_N:
        raise ValueError(f"closed-form joint probabilities are tabulated for n={ARMS_TABULATED_N} only")
    if theta_i > 0.5:
        t = dirichlet_cutoff(theta_i, n)
        return np.array([table5_polynomial(k, t) for k in range(n + 1)])
    t = dirichlet_cutoff(1.0 - theta_i, n)
    return np.array([table5_polynomial(n - k, t) for k in range(n + 1)])


def arms_multiset_probs(multiplicities, theta, n: int = ARMS_TABULATED_N) -> np.ndarray:
    """Joint probability of each vertex multiset under the antithetic sampler."""
    theta = np.asarray(theta, dtype=np.float64)
    d = theta.size
    Z = all_vertices(d).astype(np.int64)
    ones_per_dim = multiplicities @ Z  # (K, d): per-dimension ones counts
    per_dim = np.stack([arms_tuple_probs(t, n) for t in theta])  # (d, n+1)
    tuple_prob = np.prod(per_dim[np.arange(d)[None, :], ones_per_dim], axis=1)
    return permutation_counts(multiplicities) * tuple_prob


def exact_variance_arms(f: TabularPB, theta, n: int = ARMS_TABULATED_N, multiplicities=None):
    """Exact per-coordinate variance (and sum) of the antithetic estimator."""
    if n != ARMS_TABULATED_N:
        raise ValueError(f"exact antithetic variance supports n={ARMS_TABULATED_N} only")
    if f.d > 4:
        raise CapacityError("exact antithetic variance supports d <= 4")
    theta = np.asarray(theta, dtype=np.float64)
    m = multiset_table(1 << f.d, n) if multiplicities is None else multiplicities
    probs = arms_multiset_probs(m, theta, n)
    rho = est.arms_correlation(theta, n)
    g = estimates_on_multisets(m, f.table, theta, "arms", rho=rho)
    second = probs @ (g * g)
    var = second - exact_gradient(f, theta) ** 2
    return var, float(var.sum())


def scale_variance(var_theta: np.ndarray, param, r) -> np.ndarray:
    """Chain-rule a theta-space variance into parametrization space."""
    jac = param.dtheta_dr(r)
    if param.kind == "escort":
        return jac**2 * np.asarray(var_theta)[:, None]
    return jac**2 * np.asarray(var_theta)


# ---------------------------------------------------------------------------
# Monte Carlo variance and the shared exact-gradient trajectory
# ---------------------------------------------------------------------------


def mc_variance(f, estimator: str, r, param, n: int, reps: int = 10000, rng=None,
                reference=None):
    """Estimated per-coordinate variance (and sum) from repeated estimator calls."""
    if reps < 2:
        raise ValueError("variance estimation needs reps >= 2")
    fn = est.ESTIMATORS[estimator]
    sq = 0.0
    mean = 0.0
    for k in range(1, reps + 1):
        g = fn(f, r, param, n, rng).values
        sq = ((k - 1) / k) * sq + (1.0 / k) * g * g
        mean = ((k - 1) / k) * mean + (1.0 / k) * g
    if reference is None:
        if isinstance(f, TabularPB) and f.d <= 20:
            reference = param.map_gradient(r, exact_gradient(f, param.theta(r)))
        else:
            reference = mean
    var = sq - np.asarray(reference) ** 2
    return var, float(var.sum())


TRAJECTORY_ESTIMATORS = ("reinforce", "loorf", "arms", "bstar")
THETA_PROJECTION_EPS = 1e-9


def variance_trajectory_mc(f: TabularPB, n: int, lr: float = 0.1, steps: int = 10000,
                           reps: int = 10000, rng=None, theta0=None,
                           log_every: int = 1) -> list[dict]:
    """Like `variance_trajectory` but with sampled second moments (larger d).

    The exact gradient still drives the trajectory and supplies the squared
    mean term; only E[g_hat^2] is replaced by an average over `reps` draws.
    """
    from .params import make_parametrization

    d = f.d
    direct = make_parametrization("direct")
    theta = np.full(d, 0.5) if theta0 is None else np.asarray(theta0, dtype=np.float64).copy()
    rows = []
    for step in range(steps):
        grad = exact_gradient(f, theta)
        if step % log_every == 0:
            row = {
                "step": step,
                "entropy": entropy(theta),
                "exact_loss": float(vertex_probs(theta) @ f.table),
            }
            for name in TRAJECTORY_ESTIMATORS:
                var, _ = mc_variance(f, name, theta, direct, n, reps=reps, rng=rng,
                                     reference=grad)
                row[f"var_{name}"] = float(var.sum())
            rows.append(row)
        theta = np.clip(theta - lr * grad,
                        THETA_PROJECTION_EPS, 1.0 - THETA_PROJECTION_EPS)
    return rows


def variance_trajectory(f: TabularPB, n: int = 4, lr: float = 0.1, steps: int = 10000,
                        theta0=None, log_every: int = 1) -> list[dict]:
    """Follow the exact gradient in theta-space, logging every estimator's exact variance.

    One shared trajectory provides theta_t; at each logged step the exact
    sum-variances of all four estimators are recorded together with the
    entropy of the current distribution.
    """
    d = f.d
    theta = np.full(d, 0.5) if theta0 is None else np.asarray(theta0, dtype=np.float64).copy()
    m = multiset_table(1 << d, n)
    arms_exact = n == ARMS_TABULATED_N and d <= 4
    rows = []
    for step in range(steps):
        grad = exact_gradient(f, theta)
        if step % log_every == 0:
            row = {
                "step": step,
                "entropy": entropy(theta),
                "exact_loss": float(vertex_probs(theta) @ f.table),
            }
            probs = iid_multiset_probs(m, theta)
            sq_grad = grad**2
            for name in ("reinforce", "loorf", "bstar"):
                g = estimates_on_multisets(m, f.table, theta, name)
                row[f"var_{name}"] = float((probs @ (g * g) - sq_grad).sum())
            if arms_exact:
                row["var_arms"] = exact_variance_arms(f, theta, n, multiplicities=m)[1]
            rows.append(row)
        theta = np.clip(theta - lr * grad,
                        THETA_PROJECTION_EPS, 1.0 - THETA_PROJECTION_EPS)
    return rows
