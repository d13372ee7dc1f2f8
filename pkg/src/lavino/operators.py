"""Linear degradation operators with exact adjoints.

Every operator maps a (T, H, W, C) video array to a smaller one and exposes
``apply``, ``adjoint`` (exact under the Euclidean inner product), and ``pinv``
(a cheap pseudo-inverse used for initialization, not a true Moore-Penrose
inverse: temporal stages replicate frames, spatial stages upsample bilinearly,
blur stages pass through).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .video import as_video_array


class LinearOp:
    """Forward/adjoint pair on video arrays; immutable after construction."""

    kind = "abstract"

    def out_shape(self, in_shape: tuple) -> tuple:
        raise NotImplementedError

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def pinv(self, y: np.ndarray, in_shape: tuple) -> np.ndarray:
        raise NotImplementedError

    def spec(self) -> str:
        """Config-entry form, kind plus factor."""
        raise NotImplementedError


class Identity(LinearOp):
    kind = "identity"

    def out_shape(self, in_shape):
        return tuple(in_shape)

    def apply(self, x):
        return np.array(x, dtype=np.float64, copy=True)

    def adjoint(self, y):
        return np.array(y, dtype=np.float64, copy=True)

    def pinv(self, y, in_shape):
        return np.array(y, dtype=np.float64, copy=True)

    def spec(self):
        return "identity"


class TemporalPool(LinearOp):
    """Average pooling over frames with end padding by repeating the last frame.

    Output frame j is the mean of input frames [j*k, j*k + k); the final group,
    when T is not divisible by k, is padded by repeats of the last frame, so the
    adjoint folds the padded-tail mass back onto the true last frame.
    """

    kind = "temporal-pool"

    def __init__(self, k: int):
        if k < 1:
            raise ValueError(f"pool factor must be >= 1, got {k}")
        self.k = int(k)

    def out_shape(self, in_shape):
        t, h, w, c = in_shape
        return (-(-t // self.k), h, w, c)

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        t = x.shape[0]
        k = self.k
        tout = -(-t // k)
        pad = tout * k - t
        if pad:
            x = np.concatenate([x, np.repeat(x[-1:], pad, axis=0)], axis=0)
        return x.reshape(tout, k, *x.shape[1:]).mean(axis=1)

    def adjoint(self, y):
        y = np.asarray(y, dtype=np.float64)
        k = self.k
        t = self._in_frames(y.shape[0])
        out = np.repeat(y, k, axis=0) / k
        pad = y.shape[0] * k - t
        if pad:
            # padded frames were copies of the last real frame: fold their mass back
            tail = out[t:].sum(axis=0)
            out = out[:t]
            out[-1] += tail
        return out

    def pinv(self, y, in_shape):
        y = np.asarray(y, dtype=np.float64)
        t = in_shape[0]
        idx = np.minimum(np.arange(t) // self.k, y.shape[0] - 1)
        return y[idx]

    def spec(self):
        return f"temporal-pool:{self.k}"

    def _in_frames(self, tout):
        # adjoint cannot recover T from T_out alone; set by shape-binding (see bind)
        if getattr(self, "_t_in", None) is None:
            raise ValueError("temporal-pool adjoint needs the input frame count; apply bind() first")
        if -(-self._t_in // self.k) != tout:
            raise ValueError(f"shape mismatch: {tout} pooled frames inconsistent with T={self._t_in}")
        return self._t_in

    def bind(self, in_shape):
        self._t_in = in_shape[0]
        return self


class SpatialPool(LinearOp):
    """Frame-wise s-by-s block averaging; H and W must be divisible by s."""

    kind = "spatial-pool"

    def __init__(self, s: int):
        if s < 1:
            raise ValueError(f"pool factor must be >= 1, got {s}")
        self.s = int(s)

    def out_shape(self, in_shape):
        t, h, w, c = in_shape
        s = self.s
        if h % s or w % s:
            raise ValueError(f"spatial dims ({h},{w}) not divisible by {s}")
        return (t, h // s, w // s, c)

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        t, h, w, c = x.shape
        s = self.s
        if h % s or w % s:
            raise ValueError(f"spatial dims ({h},{w}) not divisible by {s}")
        return x.reshape(t, h // s, s, w // s, s, c).mean(axis=(2, 4))

    def adjoint(self, y):
        y = np.asarray(y, dtype=np.float64)
        s = self.s
        return np.repeat(np.repeat(y, s, axis=1), s, axis=2) / (s * s)

    def pinv(self, y, in_shape):
        return bilinear_upsample(np.asarray(y, dtype=np.float64), self.s)

    def spec(self):
        return f"spatial-pool:{self.s}"


class TemporalCircBlur(LinearOp):
    """Circular uniform convolution along time, centered window of odd size w.

    Self-adjoint (symmetric kernel plus circular boundary); doubly stochastic.
    Direct summation over the w offsets: the window is tiny, no FFT needed.
    """

    kind = "temporal-circ-blur"

    def __init__(self, w: int):
        if w < 1 or w % 2 == 0:
            raise ValueError(f"blur window must be odd and >= 1, got {w}")
        self.w = int(w)

    def out_shape(self, in_shape):
        return tuple(in_shape)

    def apply(self, x):
        return self._conv(np.asarray(x, dtype=np.float64))

    def adjoint(self, y):
        # time reversal of a symmetric circular kernel is itself
        return self._conv(np.asarray(y, dtype=np.float64))

    def pinv(self, y, in_shape):
        return np.array(y, dtype=np.float64, copy=True)

    def spec(self):
        return f"temporal-circ-blur:{self.w}"

    def _conv(self, x):
        r = self.w // 2
        out = np.zeros_like(x)
        for d in range(-r, r + 1):
            out += np.roll(x, -d, axis=0)
        return out / self.w


class Compose(LinearOp):
    """Right-to-left composition: apply(x) runs stages[-1] first."""

    kind = "compose"

    def __init__(self, stages):
        self.stages = list(stages)

    def out_shape(self, in_shape):
        shape = tuple(in_shape)
        for op in reversed(self.stages):
            shape = op.out_shape(shape)
        return shape

    def apply(self, x):
        for op in reversed(self.stages):
            x = op.apply(x)
        return x

    def adjoint(self, y):
        for op in self.stages:
            y = op.adjoint(y)
        return y

    def pinv(self, y, in_shape):
        # invert stages from the measurement side inward
        shapes = [tuple(in_shape)]
        for op in reversed(self.stages):
            shapes.append(op.out_shape(shapes[-1]))
        # shapes[i] is the input shape of stages[-1-i]
        for i, op in enumerate(self.stages):
            target = shapes[len(self.stages) - 1 - i]
            y = op.pinv(y, target)
        return y

    def spec(self):
        return ",".join(op.spec() for op in self.stages)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise: std sigma_n, reproducible from seed."""

    sigma_n: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma_n < 0:
            raise ValueError(f"sigma_n must be >= 0, got {self.sigma_n}")


class BoundOp:
    """A LinearOp bound to a fixed input shape, with shape checking.

    This is the form the solvers consume: apply/adjoint verify shapes, and
    the temporal-pool tail fold knows the true frame count.
    """

    def __init__(self, op: LinearOp, in_shape: tuple):
        self.op = op
        self.in_shape = tuple(in_shape)
        self._bind_temporal(op, self.in_shape)
        self.out_shape = op.out_shape(self.in_shape)

    @staticmethod
    def _bind_temporal(op, in_shape):
        if isinstance(op, Compose):
            shape = tuple(in_shape)
            for stage in reversed(op.stages):
                BoundOp._bind_temporal(stage, shape)
                shape = stage.out_shape(shape)
        elif isinstance(op, TemporalPool):
            op.bind(in_shape)

    @property
    def kind(self):
        return self.op.kind

    def apply(self, x) -> np.ndarray:
        x = as_video_array(x)
        if x.shape != self.in_shape:
            raise ValueError(f"shape mismatch: apply expects {self.in_shape}, got {x.shape}")
        return self.op.apply(x)

    def adjoint(self, y) -> np.ndarray:
        y = as_video_array(y)
        if y.shape != self.out_shape:
            raise ValueError(f"shape mismatch: adjoint expects {self.out_shape}, got {y.shape}")
        return self.op.adjoint(y)

    def pinv(self, y) -> np.ndarray:
        y = as_video_array(y)
        if y.shape != self.out_shape:
            raise ValueError(f"shape mismatch: pinv expects {self.out_shape}, got {y.shape}")
        return self.op.pinv(y, self.in_shape)

    def gram(self, x) -> np.ndarray:
        """A^T A x, the building block of every normal-equation solve."""
        return self.op.adjoint(self.op.apply(x))

    def spec(self):
        return self.op.spec()


def _stages_of(op):
    return op.stages if isinstance(op, Compose) else [op]


def degrade(op: BoundOp, x, noise: NoiseSpec) -> np.ndarray:
    """y = A x + sigma_n * eps, deterministic given the seed."""
    y = op.apply(x)
    if noise.sigma_n > 0:
        rng = np.random.default_rng(noise.seed)
        y = y + noise.sigma_n * rng.standard_normal(y.shape)
    return y


def pseudo_inverse_init(op: BoundOp, y) -> np.ndarray:
    """Cheap full-resolution initialization A^dagger y (replicate / bilinear / identity)."""
    return op.pinv(y)


def problem_operator(problem: str, in_shape: tuple) -> BoundOp:
    """The three benchmark degradations, composed spatial-after-temporal."""
    problem = problem.upper()
    if problem == "A":
        op = Compose([SpatialPool(4), TemporalPool(4)])
    elif problem == "B":
        op = Compose([SpatialPool(8), TemporalCircBlur(7)])
    elif problem == "C":
        op = Compose([SpatialPool(8), TemporalPool(8)])
    else:
        raise ValueError(f"unknown problem {problem!r} (expected A, B, or C)")
    return BoundOp(op, in_shape)


def op_from_spec(spec: str, in_shape: tuple) -> BoundOp:
    """Parse 'kind:factor,kind:factor,...' (application order) into a bound operator."""
    stages_rev = []
    for entry in spec.split(","):
        entry = entry.strip()
        if not entry:
            continue
        if ":" in entry:
            kind, _, factor = entry.partition(":")
            kind = kind.strip()
            try:
                factor = int(factor)
            except ValueError:
                raise ValueError(f"bad operator factor in {entry!r}")
        else:
            kind, factor = entry, None
        if kind == "identity":
            stages_rev.append(Identity())
        elif kind == "temporal-pool":
            stages_rev.append(TemporalPool(factor))
        elif kind == "spatial-pool":
            stages_rev.append(SpatialPool(factor))
        elif kind == "temporal-circ-blur":
            stages_rev.append(TemporalCircBlur(factor))
        else:
            raise ValueError(f"unknown operator kind {kind!r}")
    if not stages_rev:
        raise ValueError("empty operator spec")
    if len(stages_rev) == 1:
        return BoundOp(stages_rev[0], in_shape)
    # spec lists application order; Compose stores math order (rightmost first)
    return BoundOp(Compose(list(reversed(stages_rev))), in_shape)


def spec_in_application_order(op: BoundOp) -> str:
    stages = _stages_of(op.op)
    return ",".join(s.spec() for s in reversed(stages))


def bilinear_upsample(y: np.ndarray, s: int) -> np.ndarray:
    """Separable bilinear upsampling by integer factor s, frame-wise.

    Low-res pixel centers sit at (i + 0.5)*s - 0.5 in high-res coordinates;
    edge positions clamp, so constants are preserved exactly.
    """
    if s == 1:
        return np.array(y, copy=True)
    out = _interp_axis(y, s, axis=1)
    return _interp_axis(out, s, axis=2)


def _interp_axis(arr, s, axis):
    n = arr.shape[axis]
    pos = (np.arange(n * s) + 0.5) / s - 0.5
    pos = np.clip(pos, 0.0, n - 1.0)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    frac = pos - lo
    a = np.take(arr, lo, axis=axis)
    b = np.take(arr, hi, axis=axis)
    shape = [1] * arr.ndim
    shape[axis] = len(pos)
    frac = frac.reshape(shape)
    return a * (1.0 - frac) + b * frac
