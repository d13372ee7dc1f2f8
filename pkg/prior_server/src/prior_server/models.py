"""Bundled server models and the registry for wrapping real ones.

A model is a pair of callables taking (tensor, timestep) and returning a
tensor of the shape declared by ``latent_shape`` ((0,0,0,0) = same as input).
``consistency`` is required; ``eps_predict`` is optional and answered with an
error frame when absent.  Models must be pure: repeated identical requests
must produce identical responses.

Wrapping a real consistency model amounts to registering a callable that
feeds the tensor through the network at the given timestep:

    from prior_server.models import register
    register("my-vcm", ServerModel(consistency=my_net_forward))

and serving it: ``prior-server my-vcm``.  No pretrained weights ship here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

BLUR_SIGMA = 1.5  # fixed spatial blur width of the bundled "blur" model


@dataclass(frozen=True)
class ServerModel:
    consistency: Callable[[np.ndarray, int], np.ndarray]
    eps_predict: Optional[Callable[[np.ndarray, int], np.ndarray]] = None
    latent_shape: tuple = (0, 0, 0, 0)


def _gauss_taps(sigma: float) -> np.ndarray:
    radius = max(1, int(np.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _blur_axis(frame: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    # replicate-padded direct convolution; preserves constants exactly
    r = (len(taps) - 1) // 2
    pad = [(0, 0)] * frame.ndim
    pad[axis] = (r, r)
    padded = np.pad(frame, pad, mode="edge")
    out = np.zeros_like(frame)
    for i, tap in enumerate(taps):
        sl = [slice(None)] * frame.ndim
        sl[axis] = slice(i, i + frame.shape[axis])
        out += tap * padded[tuple(sl)]
    return out


def blur_consistency(tensor: np.ndarray, timestep: int) -> np.ndarray:
    """Per-frame separable Gaussian blur, sigma fixed at 1.5 px."""
    taps = _gauss_taps(BLUR_SIGMA)
    out = np.empty_like(tensor)
    for t in range(tensor.shape[0]):
        frame = _blur_axis(tensor[t], taps, axis=0)
        out[t] = _blur_axis(frame, taps, axis=1)
    return out


_REGISTRY: dict[str, ServerModel] = {
    "echo": ServerModel(consistency=lambda z, t: z,
                        eps_predict=lambda z, t: z),
    "blur": ServerModel(consistency=blur_consistency),
}


def register(model_id: str, model: ServerModel) -> None:
    _REGISTRY[model_id] = model


def get(model_id: str) -> Optional[ServerModel]:
    return _REGISTRY.get(model_id)


def known_models():
    return sorted(_REGISTRY)
