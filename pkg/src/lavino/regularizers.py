"""Weighted 3-D finite differences and the anisotropic TV functional.

Forward differences with a replicate boundary (the difference across the last
slice of each axis is zero), the standard Chambolle-Pock convention; the
divergence is then the exact adjoint.  Component order in a gradient field is
(h, v, t): h differentiates along rows (axis 1), v along columns (axis 2),
t along frames (axis 0).  Channels are uncoupled: the per-voxel Euclidean norm
mixes the three weighted differences of one channel only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# gradient-field component -> tensor axis
_COMP_AXES = (1, 2, 0)


@dataclass(frozen=True)
class TVWeights:
    lambda_h: float = 0.0
    lambda_v: float = 0.0
    lambda_t: float = 0.0

    def __post_init__(self):
        if min(self.lambda_h, self.lambda_v, self.lambda_t) < 0:
            raise ValueError(f"TV weights must be nonnegative, got {self}")

    @property
    def values(self):
        return (self.lambda_h, self.lambda_v, self.lambda_t)

    def is_zero(self) -> bool:
        return max(self.values) == 0.0

    def is_pure_temporal(self) -> bool:
        return self.lambda_h == 0.0 and self.lambda_v == 0.0


def _forward_diff(x: np.ndarray, axis: int) -> np.ndarray:
    out = np.zeros_like(x)
    src = [slice(None)] * x.ndim
    dst = [slice(None)] * x.ndim
    dst[axis] = slice(0, x.shape[axis] - 1)
    out[tuple(dst)] = np.diff(x, axis=axis)
    return out


def _forward_diff_adjoint(p: np.ndarray, axis: int) -> np.ndarray:
    # adjoint of d[i] = u[i+1]-u[i] (i<n-1), d[n-1] = 0:
    #   (D^T p)[0] = -p[0], (D^T p)[i] = p[i-1]-p[i], (D^T p)[n-1] = p[n-2]
    n = p.shape[axis]
    out = np.zeros_like(p)
    if n == 1:
        return out

    def take(a, b):
        idx = [slice(None)] * p.ndim
        idx[axis] = slice(a, b)
        return tuple(idx)

    out[take(1, n)] = p[take(0, n - 1)]
    out[take(0, n - 1)] -= p[take(0, n - 1)]
    return out


def grad3(x: np.ndarray, w: TVWeights) -> np.ndarray:
    """Weighted forward-difference gradient: (T,H,W,C,3) with components (h,v,t)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(x.shape + (3,))
    for comp, (lam, axis) in enumerate(zip(w.values, _COMP_AXES)):
        if lam != 0.0:
            out[..., comp] = lam * _forward_diff(x, axis)
    return out


def div3(p: np.ndarray, w: TVWeights) -> np.ndarray:
    """Exact adjoint of grad3: <grad3(x), p> == <x, div3(p)> for all x, p."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros(p.shape[:-1])
    for comp, (lam, axis) in enumerate(zip(w.values, _COMP_AXES)):
        if lam != 0.0:
            out += lam * _forward_diff_adjoint(p[..., comp], axis)
    return out


def tv3(x: np.ndarray, w: TVWeights) -> float:
    """Sum over voxels of the Euclidean norm of the weighted difference triple."""
    g = grad3(x, w)
    return float(np.sqrt((g * g).sum(axis=-1)).sum())


def tv3_smoothed(x: np.ndarray, w: TVWeights, mu: float = 1e-8):
    """Huber-style smoothing sqrt(|g|^2 + mu^2) - mu; returns (value, gradient).

    The gradient is div3 of g / sqrt(|g|^2 + mu^2), defined everywhere.
    """
    g = grad3(x, w)
    norm = np.sqrt((g * g).sum(axis=-1) + mu * mu)
    value = float((norm - mu).sum())
    grad = div3(g / norm[..., None], w)
    return value, grad


def grad3_norm(shape: tuple, w: TVWeights, iters: int = 50, seed: int = 0) -> float:
    """Power-iteration estimate of ||D_lambda|| on the given tensor shape."""
    if w.is_zero():
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    x /= np.linalg.norm(x)
    norm = 0.0
    for _ in range(iters):
        y = div3(grad3(x, w), w)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
    return float(np.sqrt(norm))
