"""Reference-based quality metrics: per-frame PSNR and single-scale SSIM.

PSNR assumes a peak of 1.0 and is capped at 100 dB for (near-)zero MSE so
reports stay finite and sortable.  SSIM follows the original single-scale
formulation: 11x11 Gaussian window with sigma 1.5, K1=0.01, K2=0.03, dynamic
range 1.0, statistics taken over fully interior window positions (valid
mode), channel-averaged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .video import as_video_array

PSNR_CAP_DB = 100.0
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    psnr_per_frame: np.ndarray
    ssim_per_frame: np.ndarray


def _check_shapes(x, ref):
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {ref.shape}")


def psnr(x, ref) -> tuple[np.ndarray, float]:
    """Per-frame 10*log10(1/MSE) and the arithmetic mean over frames."""
    x = as_video_array(x)
    ref = as_video_array(ref)
    _check_shapes(x, ref)
    err = (x - ref) ** 2
    mse = err.mean(axis=(1, 2, 3))
    with np.errstate(divide="ignore"):
        vals = 10.0 * np.log10(1.0 / mse)
    vals = np.minimum(vals, PSNR_CAP_DB)
    return vals, float(vals.mean())


def _ssim_window() -> np.ndarray:
    r = _SSIM_WINDOW // 2
    g = np.exp(-0.5 * (np.arange(-r, r + 1) / _SSIM_SIGMA) ** 2)
    return g / g.sum()


def _valid_filter(img: np.ndarray, k: np.ndarray) -> np.ndarray:
    # separable filtering then crop: interior pixels never see the boundary,
    # so this equals a true 'valid' windowed correlation
    r = len(k) // 2
    out = correlate1d(img, k, axis=0, mode="constant")
    out = correlate1d(out, k, axis=1, mode="constant")
    return out[r:-r, r:-r]


def ssim_frame(a: np.ndarray, b: np.ndarray) -> float:
    """Single-frame SSIM, channel-averaged; inputs are (H, W, C)."""
    h, w = a.shape[:2]
    if h < _SSIM_WINDOW or w < _SSIM_WINDOW:
        raise ValueError(f"frame {h}x{w} smaller than the {_SSIM_WINDOW}x{_SSIM_WINDOW} SSIM window")
    k = _ssim_window()
    c1 = (_SSIM_K1 * 1.0) ** 2
    c2 = (_SSIM_K2 * 1.0) ** 2
    vals = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        mx = _valid_filter(x, k)
        my = _valid_filter(y, k)
        mxx = _valid_filter(x * x, k)
        myy = _valid_filter(y * y, k)
        mxy = _valid_filter(x * y, k)
        vx = mxx - mx * mx
        vy = myy - my * my
        cxy = mxy - mx * my
        num = (2 * mx * my + c1) * (2 * cxy + c2)
        den = (mx * mx + my * my + c1) * (vx + vy + c2)
        vals.append((num / den).mean())
    return float(np.mean(vals))


def ssim(x, ref) -> tuple[np.ndarray, float]:
    """Per-frame SSIM and the mean over frames."""
    x = as_video_array(x)
    ref = as_video_array(ref)
    _check_shapes(x, ref)
    vals = np.array([ssim_frame(x[t], ref[t]) for t in range(x.shape[0])])
    return vals, float(vals.mean())


def evaluate(x, ref) -> MetricReport:
    p_frames, p_mean = psnr(x, ref)
    s_frames, s_mean = ssim(x, ref)
    return MetricReport(psnr=p_mean, ssim=s_mean,
                        psnr_per_frame=p_frames, ssim_per_frame=s_frames)
