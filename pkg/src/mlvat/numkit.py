"""Deterministic dense math used by the rest of the package.

Vectors and matrices are plain float64 numpy arrays. Randomness goes
through a counter-based Philox generator so that a fixed seed gives the
same draw sequence on every platform; parallel consumers get independent
substreams via :func:`split_rng` instead of sharing one generator.
"""

from __future__ import annotations

import numpy as np

from .errors import LengthMismatch, ZeroNorm

NORM_FLOOR = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Seeded counter-based generator (identical sequence across platforms)."""
    return np.random.Generator(np.random.Philox(seed))


def split_rng(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """n independent substreams; the parent generator stays usable."""
    return rng.spawn(n)


def as_vec(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1:
        raise LengthMismatch(f"expected 1-d vector, got shape {a.shape}")
    return a


def l2_normalize(v) -> np.ndarray:
    """Scale v to unit L2 norm. Raises ZeroNorm below the 1e-12 floor."""
    a = as_vec(v)
    norm = float(np.linalg.norm(a))
    if norm < NORM_FLOOR:
        raise ZeroNorm(f"norm {norm:.3e} below {NORM_FLOOR:.0e}")
    return a / norm


def sample_unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Isotropic unit vector: Gaussian components, then L2 normalization."""
    if dim < 1:
        raise LengthMismatch(f"dim must be >= 1, got {dim}")
    for _ in range(8):
        g = rng.standard_normal(dim)
        norm = float(np.linalg.norm(g))
        if norm >= NORM_FLOOR:
            return g / norm
    raise ZeroNorm("gaussian draws underflowed 8 times")


def stable_sigmoid(z) -> np.ndarray:
    """Elementwise logistic function, overflow-safe for arbitrary |z|."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits(z, y) -> float:
    """Mean binary cross entropy of logits z against {0,1} targets y.

    Uses the log-sum-exp-stable form max(z,0) - z*y + log1p(exp(-|z|)),
    so saturated logits never overflow.
    """
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if z.shape != y.shape:
        raise LengthMismatch(f"logits shape {z.shape} != targets shape {y.shape}")
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return float(np.mean(loss))


def mse(p, q) -> float:
    """Mean squared componentwise difference."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise LengthMismatch(f"shape {p.shape} != shape {q.shape}")
    return float(np.mean((p - q) ** 2))
