"""Vectorized multi-seed experiment runs for the statistical reproduction studies.

All seeds of a setting advance simultaneously on (seeds, ...) arrays using the
batch estimator formulas, which the test suite pins against the iterative
production estimators.  Only tabular (or tabulated) benchmarks are supported,
so losses are plain table lookups.
"""

from __future__ import annotations

import numpy as np

from . import estimators as est
from .params import Parametrization
from .pbcore import TabularPB, vertex_probs


def _copula_uniforms(shape3, rng) -> np.ndarray:
    """(S, n, d) marginally-uniform copula draws, antithetic along the n axis."""
    n = shape3[1]
    e = -np.log(rng.random(shape3))
    dval = e / e.sum(axis=1, keepdims=True)
    return 1.0 - (1.0 - dval) ** (n - 1)


def _draw(estimator: str, theta: np.ndarray, n: int, rng) -> np.ndarray:
    """(S, n, d) sample batch for one iteration of every seed."""
    s, d = theta.shape
    if estimator == "arms":
        uniforms = _copula_uniforms((s, n, d), rng)
        return est.arms_draw(theta[:, None, :], uniforms)
    return (rng.random((s, n, d)) < theta[:, None, :]).astype(np.float64)


def _batch_estimate(estimator: str, f: TabularPB, theta, r, param: Parametrization,
                    z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradient estimates (S, ...) and per-seed mean sampled loss (S,)."""
    d = z.shape[-1]
    j = f.table[(z.astype(np.int64) * (1 << np.arange(d))).sum(axis=-1)]  # (S, n)
    scores = param.score(r[:, None], z)
    if estimator == "reinforce":
        g = est.reinforce_from_samples(j, scores)
    elif estimator == "loorf":
        g = est.loorf_from_samples(j, scores)
    elif estimator == "arms":
        rho = est.arms_correlation(theta, param_n := z.shape[1])
        g = est.loorf_from_samples(j, scores)
        g = g / (1.0 - rho)[..., None] if param.kind == "escort" else g / (1.0 - rho)
    elif estimator == "bstar":
        beta = np.stack([est.optimal_baselines(f, th) for th in theta])
        if param.kind == "escort":
            beta = beta[..., None]
        g = est.baseline_from_samples(j, scores, beta)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return g, j.mean(axis=-1)


def population_run(
    f: TabularPB,
    param: Parametrization,
    estimator: str,
    n: int,
    seeds: int,
    iters: int,
    lr: float,
    rng,
    optimizer: str = "sgd",
    lr_decay_frac: float = 0.6,
    lr_decay_mult: float = 0.5,
    rmsprop_decay: float = 0.99,
    rmsprop_eps: float = 1e-8,
    record_every: int = 0,
    final_window: int = 1,
) -> dict:
    """Advance `seeds` independent trajectories in lockstep from theta_0 = 0.5.

    Returns per-seed final sampled losses (averaged over the last
    `final_window` iterations to suppress single-draw noise), final exact
    losses, and an optional mean exact-loss curve every `record_every` steps.
    """
    r0 = param.init_from_theta(np.full(f.d, 0.5))
    r = np.broadcast_to(r0, (seeds,) + r0.shape).copy()
    current_lr = lr
    decay_at = int(np.ceil(lr_decay_frac * iters)) if lr_decay_frac > 0 else -1
    sq_avg = np.zeros_like(r)
    curve = []
    tail_sum = np.zeros(seeds)
    tail_count = 0

    def exact_losses() -> np.ndarray:
        theta = param.theta(r)
        return np.array([float(vertex_probs(th) @ f.table) for th in theta])

    for it in range(1, iters + 1):
        if it == decay_at:
            current_lr *= lr_decay_mult
        theta = param.theta(r)
        z = _draw(estimator, theta, n, rng)
        g, sampled = _batch_estimate(estimator, f, theta, r, param, z)
        if optimizer == "rmsprop":
            sq_avg = rmsprop_decay * sq_avg + (1.0 - rmsprop_decay) * g * g
            r = param.project(r - current_lr * g / (np.sqrt(sq_avg) + rmsprop_eps))
        else:
            r = param.project(r - current_lr * g)
        if it > iters - final_window:
            tail_sum += sampled
            tail_count += 1
        if record_every and (it % record_every == 0 or it == iters):
            curve.append((it, float(exact_losses().mean())))
    return {
        "final_sampled": tail_sum / max(tail_count, 1),
        "final_exact": exact_losses(),
        "curve": curve,
    }
