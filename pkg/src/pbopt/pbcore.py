"""Core pseudo-Boolean function machinery.

A cost J over {0,1}^d is identified with a table of 2^d reals indexed by the
little-endian integer encoding of its binary input.  This module provides the
vertex codec, the unique multilinear interpolating polynomial, and exact
expectation / gradient / entropy computations under a factorized Bernoulli
distribution, all by full enumeration (intended for small d).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

TABULAR_MAX_D = 24


class CapacityError(ValueError):
    """Raised when an exact-enumeration operation would be too large."""


class CapabilityError(TypeError):
    """Raised when a benchmark lacks a required capability (e.g. smooth gradient)."""


def vertex_decode(h: int, d: int) -> np.ndarray:
    """Bits of vertex index h, little-endian: bit i is the coefficient of 2^i."""
    if not 0 <= h < (1 << d):
        raise ValueError(f"vertex index {h} out of range for d={d}")
    return (h >> np.arange(d)) & 1


def vertex_encode(bits) -> int:
    bits = np.asarray(bits)
    if bits.ndim != 1 or not np.isin(bits, (0, 1)).all():
        raise ValueError("bits must be a flat 0/1 vector")
    return int((bits.astype(np.int64) << np.arange(bits.size)).sum())


def all_vertices(d: int) -> np.ndarray:
    """(2^d, d) matrix whose row h is vertex_decode(h, d)."""
    h = np.arange(1 << d)
    return ((h[:, None] >> np.arange(d)) & 1).astype(np.float64)


def hamming(z, z2) -> int:
    z = np.asarray(z)
    z2 = np.asarray(z2)
    if z.shape != z2.shape:
        raise ValueError(f"dimension mismatch: {z.shape} vs {z2.shape}")
    return int(np.sum(z * (1 - z2) + (1 - z) * z2))


class PBFunction:
    """Cost over {0,1}^d, optionally extended smoothly to [0,1]^d.

    Subclasses with a smooth extension override ``eval_smooth`` and
    ``grad_smooth``; callers test for the capability with ``is not None``.
    """

    d: int
    eval_smooth = None
    grad_smooth = None

    def eval_discrete(self, z) -> float:
        raise NotImplementedError

    def require_smooth(self):
        if self.eval_smooth is None or self.grad_smooth is None:
            raise CapabilityError(f"{type(self).__name__} has no smooth extension")


@dataclass(frozen=True)
class TabularPB(PBFunction):
    """A PB function stored as its full table of 2^d values in vertex order."""

    d: int
    table: np.ndarray

    def __post_init__(self):
        if self.d > TABULAR_MAX_D:
            raise CapacityError(f"d={self.d} exceeds tabular cap {TABULAR_MAX_D}")
        table = np.asarray(self.table, dtype=np.float64)
        if table.shape != (1 << self.d,):
            raise ValueError(f"table must have 2^{self.d} entries, got {table.shape}")
        if not np.isfinite(table).all():
            raise ValueError("table entries must be finite")
        object.__setattr__(self, "table", table)

    def eval_discrete(self, z) -> float:
        return float(self.table[vertex_encode(z)])

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(struct.pack("<Q", self.d))
            fh.write(self.table.astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "TabularPB":
        with open(path, "rb") as fh:
            (d,) = struct.unpack("<Q", fh.read(8))
            table = np.frombuffer(fh.read(), dtype="<f8")
        return cls(d=int(d), table=table)

    @classmethod
    def from_function(cls, f: PBFunction, d: int | None = None) -> "TabularPB":
        """Tabulate any PB function by enumerating all vertices."""
        d = f.d if d is None else d
        if d > TABULAR_MAX_D:
            raise CapacityError(f"d={d} exceeds tabular cap {TABULAR_MAX_D}")
        verts = all_vertices(d)
        table = np.array([f.eval_discrete(verts[h]) for h in range(1 << d)])
        return cls(d=d, table=table)


@dataclass(frozen=True)
class MultilinearPoly:
    """Sparse multilinear polynomial: subset bitmask -> coefficient."""

    d: int
    weights: dict = field(default_factory=dict)

    def eval(self, u) -> float:
        u = np.asarray(u, dtype=np.float64)
        total = 0.0
        for mask, w in self.weights.items():
            prod = 1.0
            m = mask
            i = 0
            while m:
                if m & 1:
                    prod *= u[i]
                m >>= 1
                i += 1
            total += w * prod
        return total

    @property
    def degree(self) -> int:
        return max((int(mask).bit_count() for mask, w in self.weights.items() if w != 0.0), default=0)


def to_multilinear(f: TabularPB) -> MultilinearPoly:
    """Unique multilinear coefficients w_S via a Moebius transform of the table."""
    if f.d > TABULAR_MAX_D:
        raise CapacityError(f"d={f.d} too large for multilinear expansion")
    w = f.table.copy()
    for i in range(f.d):
        step = 1 << i
        idx = (np.arange(1 << f.d) & step).astype(bool)
        w[idx] -= w[np.arange(1 << f.d)[idx] ^ step]
    weights = {int(mask): float(val) for mask, val in enumerate(w) if val != 0.0}
    return MultilinearPoly(d=f.d, weights=weights)


def vertex_probs(theta) -> np.ndarray:
    """p_theta(zeta_h) for all h, under the factorized Bernoulli at theta."""
    theta = np.asarray(theta, dtype=np.float64)
    p = np.array([1.0])
    for t in theta:
        p = np.concatenate([p * (1.0 - t), p * t])
    return p


def exact_expectation(f: TabularPB, theta) -> float:
    """E[J(z)] under z_i ~ Ber(theta_i), by full enumeration."""
    return float(vertex_probs(theta) @ f.table)


def exact_gradient(f: TabularPB, theta) -> np.ndarray:
    """d/dtheta_i of the exact expectation, valid on all of [0,1]^d.

    Coordinate i is sum_h J(zeta_h) (2 z_i - 1) prod_{j != i} p_theta_j(z_j).
    """
    theta = np.asarray(theta, dtype=np.float64)
    d = f.d
    Z = all_vertices(d)
    factors = theta * Z + (1.0 - theta) * (1.0 - Z)  # (2^d, d)
    grad = np.empty(d)
    for i in range(d):
        cols = factors.copy()
        cols[:, i] = 1.0
        grad[i] = np.sum(f.table * (2.0 * Z[:, i] - 1.0) * np.prod(cols, axis=1))
    return grad


def entropy(theta) -> float:
    """Shannon entropy of the factorized Bernoulli, in nats, with 0 log 0 := 0."""
    theta = np.asarray(theta, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = -theta * np.log(theta) - (1.0 - theta) * np.log(1.0 - theta)
    return float(np.where((theta <= 0.0) | (theta >= 1.0), 0.0, terms).sum())


def pb_derivative(f: PBFunction, z, i: int) -> float:
    """Discrete derivative J(z with z_i=1) - J(z with z_i=0)."""
    z = np.asarray(z, dtype=np.float64).copy()
    if not 0 <= i < f.d:
        raise ValueError(f"coordinate {i} out of range for d={f.d}")
    z[i] = 1.0
    hi = f.eval_discrete(z)
    z[i] = 0.0
    lo = f.eval_discrete(z)
    return hi - lo
