"""Benchmark losses for the desk-scale experiments.

Tabular families (exponential draws, checkerboard, hamming-shell construction)
produce `TabularPB` instances; the network-based losses are fixed MLPs with
frozen per-unit normalization and hand-written backpropagation, exposing both
a discrete evaluation and a smooth extension with gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pbcore import CapacityError, PBFunction, TabularPB, all_vertices, hamming

LEAKY_SLOPE = 0.01
NORM_EPS = 1e-5
N_PROBE_POINTS = 1024
EXP_TABULAR_MAX_D = 16


# ---------------------------------------------------------------------------
# Tabular benchmarks
# ---------------------------------------------------------------------------


def tabular_from_draws(draws: np.ndarray, d: int) -> TabularPB:
    """Affinely map positive draws so the largest lands on -1 and the smallest on +1."""
    draws = np.asarray(draws, dtype=np.float64)
    lo, hi = draws.min(), draws.max()
    if hi == lo:
        return TabularPB(d=d, table=np.zeros(1 << d))  # degenerate: constant zero
    return TabularPB(d=d, table=1.0 - 2.0 * (draws - lo) / (hi - lo))


def make_exponential_tabular(d: int, rate: float = 1.5, rng=None) -> TabularPB:
    """2^d iid exponential draws, normalized so min -> +1 and max -> -1."""
    if d > EXP_TABULAR_MAX_D:
        raise CapacityError(f"exp-tabular capped at d={EXP_TABULAR_MAX_D}")
    draws = rng.exponential(scale=1.0 / rate, size=1 << d)
    return tabular_from_draws(draws, d)


def make_checkerboard(m: float, big: float) -> TabularPB:
    """d=2 saddle with equal-probability minima on the diagonal (m < big)."""
    if not m < big:
        raise ValueError("checkerboard requires m < M")
    return TabularPB(d=2, table=np.array([big, m, m, big], dtype=np.float64))


@dataclass(frozen=True)
class GenLossSpec:
    """Single deep minimum at zstar against a hamming-distance shell structure."""

    zstar: np.ndarray
    m: float
    m0: float
    dm: float


def genloss_table(zstar, m: float, m0: float, dm: float) -> TabularPB:
    """Build the shell loss without validating the uniqueness condition."""
    zstar = np.asarray(zstar, dtype=np.float64)
    d = zstar.size
    if dm <= 0:
        raise ValueError("dm must be positive")
    verts = all_vertices(d)
    table = np.array([m0 - hamming(v, zstar) * dm / d for v in verts])
    table[int((zstar.astype(np.int64) << np.arange(d)).sum())] = m
    return TabularPB(d=d, table=table)


def make_genloss(spec: GenLossSpec) -> TabularPB:
    if not spec.m < spec.m0 - spec.dm:
        raise ValueError(
            f"m={spec.m} must lie below m0 - dm = {spec.m0 - spec.dm} for the minimum to be unique"
        )
    return genloss_table(spec.zstar, spec.m, spec.m0, spec.dm)


# ---------------------------------------------------------------------------
# d=1 continuation-path counter-examples
# ---------------------------------------------------------------------------

SLIVERS = ((0.125, 0.13), (0.87, 0.875))
GENTLE_SLOPE = -0.5
STEEP_SLOPE = 200.0


class PiecewiseTrapLoss(PBFunction):
    """d=1, J(0) < J(1); descends toward z=1 almost everywhere except two thin
    windows with a steep slope back toward z=0."""

    d = 1

    def _overlap(self, u: float) -> float:
        return sum(max(0.0, min(u, b) - a) for a, b in SLIVERS)

    def eval_smooth(self, u) -> float:
        u = float(np.asarray(u).reshape(()))
        return GENTLE_SLOPE * u + (STEEP_SLOPE - GENTLE_SLOPE) * self._overlap(u)

    def grad_smooth(self, u) -> np.ndarray:
        u = float(np.asarray(u).reshape(()))
        in_sliver = any(a <= u < b for a, b in SLIVERS)
        return np.array([STEEP_SLOPE if in_sliver else GENTLE_SLOPE])

    def eval_discrete(self, z) -> float:
        return self.eval_smooth(z)


class SmoothTrapLoss(PBFunction):
    """d=1, J(0) < J(1); strictly descends toward z=1 for every z > 0.4, so the
    annealed method fails from the centered initialization at any learning rate."""

    d = 1
    peak = 0.4
    left_curvature = 4.0
    right_curvature = 1.0

    def eval_smooth(self, u) -> float:
        u = float(np.asarray(u).reshape(()))
        a = self.left_curvature if u < self.peak else self.right_curvature
        return -a * (u - self.peak) ** 2

    def grad_smooth(self, u) -> np.ndarray:
        u = float(np.asarray(u).reshape(()))
        a = self.left_curvature if u < self.peak else self.right_curvature
        return np.array([-2.0 * a * (u - self.peak)])

    def eval_discrete(self, z) -> float:
        return self.eval_smooth(z)


COUNTEREXAMPLES = {"ex31": PiecewiseTrapLoss, "ex32": SmoothTrapLoss}


def make_counterexample(which: str) -> PBFunction:
    try:
        return COUNTEREXAMPLES[which.lower()]()
    except KeyError:
        raise ValueError(f"unknown counterexample {which!r}; expected ex31 or ex32") from None


# ---------------------------------------------------------------------------
# Fixed MLPs with frozen normalization
# ---------------------------------------------------------------------------


def _leaky(x):
    return np.where(x > 0.0, x, LEAKY_SLOPE * x)


def _leaky_deriv(x):
    return np.where(x > 0.0, 1.0, LEAKY_SLOPE)


class FixedMLP:
    """MLP with immutable weights and frozen per-unit standardization.

    Layer l computes h = leaky((h_prev @ W_l - mu_l) / s_l); the output layer
    is linear followed (optionally) by standardization only.  No biases: the
    weight count of layer l is in_width * out_width exactly.
    """

    def __init__(self, widths, rng, weight_init="pm1", normalize_output=True,
                 normalize_hidden=True):
        self.widths = list(widths)
        self.normalize_output = normalize_output
        self.normalize_hidden = normalize_hidden
        self.weights = []
        for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:]):
            if weight_init == "pm1":
                w = rng.choice([-1.0, 1.0], size=(fan_in, fan_out))
            elif weight_init == "xavier":
                w = rng.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), size=(fan_in, fan_out))
            else:
                raise ValueError(f"unknown weight init {weight_init!r}")
            self.weights.append(w)
        self.norm_stats = None

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def weight_count(self) -> int:
        return sum(w.size for w in self.weights)

    def _normalized_layers(self):
        last = self.n_layers - 1
        return [l < last and self.normalize_hidden or l == last and self.normalize_output
                for l in range(self.n_layers)]

    def calibrate(self, probe_x: np.ndarray, mask=None):
        """Freeze per-unit standardization statistics from one probe batch."""
        masks = self._split_mask(mask)
        h = np.asarray(probe_x, dtype=np.float64)
        stats = []
        for l, w in enumerate(self.weights):
            z = h @ (w if masks is None else w * masks[l])
            if self._normalized_layers()[l]:
                mu = z.mean(axis=0)
                s = np.sqrt(z.var(axis=0) + NORM_EPS)
                stats.append((mu, s))
                z = (z - mu) / s
            else:
                stats.append(None)
            h = _leaky(z) if l < self.n_layers - 1 else z
        self.norm_stats = stats

    def _split_mask(self, mask):
        if mask is None:
            return None
        mask = np.asarray(mask, dtype=np.float64)
        out, offset = [], 0
        for w in self.weights:
            out.append(mask[offset : offset + w.size].reshape(w.shape))
            offset += w.size
        if offset != mask.size:
            raise ValueError(f"mask length {mask.size} != weight count {self.weight_count}")
        return out

    def _forward_cached(self, x: np.ndarray, mask=None):
        if self.norm_stats is None:
            raise RuntimeError("call calibrate() before forward passes")
        masks = self._split_mask(mask)
        h = np.asarray(x, dtype=np.float64)
        cache = []
        for l, w in enumerate(self.weights):
            w_eff = w if masks is None else w * masks[l]
            z = h @ w_eff
            if self.norm_stats[l] is not None:
                mu, s = self.norm_stats[l]
                y = (z - mu) / s
            else:
                y = z
            is_last = l == self.n_layers - 1
            out = y if is_last else _leaky(y)
            cache.append((h, y, w_eff))
            h = out
        return h, cache

    def forward(self, x: np.ndarray, mask=None) -> np.ndarray:
        return self._forward_cached(x, mask)[0]

    def _backward(self, cache, grad_out: np.ndarray, wrt: str, mask=None):
        """Backpropagate grad_out (d loss / d network output) to input or mask."""
        masks = self._split_mask(mask) if wrt == "mask" else None
        delta = np.asarray(grad_out, dtype=np.float64)
        mask_grads = [None] * self.n_layers
        for l in range(self.n_layers - 1, -1, -1):
            h, y, w_eff = cache[l]
            if l < self.n_layers - 1:
                delta = delta * _leaky_deriv(y)
            if self.norm_stats[l] is not None:
                delta = delta / self.norm_stats[l][1]
            if wrt == "mask":
                mask_grads[l] = self.weights[l] * (h.T @ delta)
            delta = delta @ w_eff.T
        if wrt == "mask":
            return np.concatenate([g.ravel() for g in mask_grads])
        return delta

    def grad_input(self, x: np.ndarray) -> np.ndarray:
        """Jacobian rows d out / d x for a scalar-output network, per batch row."""
        out, cache = self._forward_cached(x)
        return self._backward(cache, np.ones_like(out), wrt="input")


class NNLoss(PBFunction):
    """Binary input fed straight into a fixed +-1-weight MLP acting as the cost.

    The input is mapped to [-1, 1]; nine hidden layers of twenty units apply
    linear -> frozen standardization -> LeakyReLU, and the scalar output is
    standardized only.  Statistics come from uniform probe points in [0,1]^d.
    """

    def __init__(self, d: int, rng, hidden_layers: int = 9, width: int = 20,
                 n_probe: int = N_PROBE_POINTS):
        self.d = d
        self.mlp = FixedMLP([d] + [width] * hidden_layers + [1], rng, weight_init="pm1")
        probe_u = rng.random((n_probe, d))
        self.mlp.calibrate(2.0 * probe_u - 1.0)

    def eval_smooth(self, u) -> float:
        u = np.asarray(u, dtype=np.float64).reshape(1, self.d)
        return float(self.mlp.forward(2.0 * u - 1.0)[0, 0])

    def grad_smooth(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64).reshape(1, self.d)
        return 2.0 * self.mlp.grad_input(2.0 * u - 1.0)[0]

    def eval_discrete(self, z) -> float:
        return self.eval_smooth(z)

    def eval_batch(self, u_batch: np.ndarray) -> np.ndarray:
        return self.mlp.forward(2.0 * np.asarray(u_batch, dtype=np.float64) - 1.0)[:, 0]

    def tabulate(self) -> TabularPB:
        return TabularPB(d=self.d, table=self.eval_batch(all_vertices(self.d)))


def make_nnloss(d: int, rng, **kwargs) -> NNLoss:
    return NNLoss(d, rng, **kwargs)


# ---------------------------------------------------------------------------
# Masked regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaskedRegressionSpec:
    input_dim: int = 10
    backbone_hidden: tuple = (20, 20, 20, 20)
    target_hidden: tuple = (100, 100, 100, 100, 100)
    train_size: int = 2000
    val_size: int = 1000
    batch_size: int = 100


class MaskedRegression(PBFunction):
    """Learn a fixed target network's mapping by masking a fixed backbone.

    z masks the backbone weights element-wise; the loss is the mean absolute
    error against the target outputs on the current mini-batch.  The smooth
    extension multiplies weights by real-valued mask entries, with gradients
    taken with respect to the mask only.
    """

    def __init__(self, spec: MaskedRegressionSpec, rng):
        self.spec = spec
        k = spec.input_dim
        self.target = FixedMLP([k] + list(spec.target_hidden) + [1], rng,
                               weight_init="pm1", normalize_output=False)
        self.backbone = FixedMLP([k] + list(spec.backbone_hidden) + [1], rng,
                                 weight_init="xavier", normalize_output=False)
        self.d = self.backbone.weight_count

        x_all = rng.uniform(-1.0, 1.0, size=(spec.train_size + spec.val_size, k))
        self.train_x, self.val_x = x_all[: spec.train_size], x_all[spec.train_size :]
        self.target.calibrate(self.train_x)
        raw_train = self.target.forward(self.train_x)[:, 0]
        lo, hi = raw_train.min(), raw_train.max()
        self.train_y = (raw_train - lo) / (hi - lo)
        self.val_y = (self.target.forward(self.val_x)[:, 0] - lo) / (hi - lo)

        self.backbone.calibrate(self.train_x, mask=np.ones(self.d))
        self._batch_idx = np.arange(min(spec.batch_size, spec.train_size))

    def resample_batch(self, rng):
        self._batch_idx = rng.choice(self.spec.train_size, size=self.spec.batch_size,
                                     replace=False)

    def _loss_and_cache(self, mask, x, y):
        pred, cache = self.backbone._forward_cached(x, mask=mask)
        resid = pred[:, 0] - y
        return float(np.mean(np.abs(resid))), resid, cache

    def eval_smooth(self, mask) -> float:
        x, y = self.train_x[self._batch_idx], self.train_y[self._batch_idx]
        return self._loss_and_cache(np.asarray(mask, dtype=np.float64), x, y)[0]

    def grad_smooth(self, mask) -> np.ndarray:
        mask = np.asarray(mask, dtype=np.float64)
        x, y = self.train_x[self._batch_idx], self.train_y[self._batch_idx]
        _, resid, cache = self._loss_and_cache(mask, x, y)
        grad_out = (np.sign(resid) / resid.size)[:, None]
        return self.backbone._backward(cache, grad_out, wrt="mask", mask=mask)

    def eval_discrete(self, z) -> float:
        return self.eval_smooth(z)

    def validation_loss(self, mask) -> float:
        return self._loss_and_cache(np.asarray(mask, dtype=np.float64),
                                    self.val_x, self.val_y)[0]

    def probe_loss(self, mask, probe_idx) -> float:
        x, y = self.train_x[probe_idx], self.train_y[probe_idx]
        return self._loss_and_cache(np.asarray(mask, dtype=np.float64), x, y)[0]


def make_masked_regression(spec: MaskedRegressionSpec, rng) -> MaskedRegression:
    return MaskedRegression(spec, rng)
