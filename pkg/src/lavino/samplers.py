"""Restoration samplers: the split-Langevin family plus two baselines.

* ``latino_restore`` - alternates a video-prior SAE step, a TV-regularized
  likelihood prox, a frame-wise image-prior SAE step, and a quadratic
  likelihood prox; the final iteration stops after the TV prox.
* ``latino_v_restore`` - the video-prior-only variant: SAE step plus one
  likelihood prox per iteration.
* ``latino_image_restore`` - the single-frame loop: SAE step plus quadratic
  prox.
* ``vision_xl_restore`` - DDIM-inversion initialization, then Tweedie
  denoising, CG data-consistency refinement, scheduled low-pass filtering, and
  batch-consistent renoising down the schedule.
* ``admm_tv_restore`` - classical ADMM on the TV-regularized least-squares
  objective.

Noise is content-addressed: every SAE call derives its generator from
(seed, role, iteration, frame), so runs are bit-reproducible and the
single-frame loop matches the video loop restricted to one frame.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .operators import BoundOp, pseudo_inverse_init
from .priors import Prior, sae_step, separable_blur
from .prox import AdamParams, CGParams, PDHGParams, cg_solve, prox_quadratic, \
    prox_tv_data_adam, prox_tv_data_pdhg
from .regularizers import TVWeights, grad3, div3, tv3
from .video import as_video_array

DEFAULT_VCM_TIMESTEPS = (757, 522, 375, 255, 125)
DEFAULT_ICM_TIMESTEPS = (374, 249, 124, 63)

_ROLE_VCM = 0
_ROLE_ICM = 1
_ROLE_RENOISE = 2


@dataclass(frozen=True)
class SamplerConfig:
    vcm_timesteps: tuple = DEFAULT_VCM_TIMESTEPS
    icm_timesteps: tuple = DEFAULT_ICM_TIMESTEPS
    step_vcm: float = 1e5          # eta * delta
    step_icm: float = 1e5          # (1 - eta) * delta
    tv_weights: TVWeights = field(default_factory=TVWeights)
    tv_solver: str = "pdhg"        # pdhg | adam
    cg: CGParams = field(default_factory=CGParams)
    pdhg: PDHGParams = field(default_factory=PDHGParams)
    adam: AdamParams = field(default_factory=AdamParams)
    sigma_n: float = 1e-3
    seed: int = 0
    init: str = "pseudo-inverse"   # pseudo-inverse | file
    init_tensor: np.ndarray | None = None

    def __post_init__(self):
        if len(self.icm_timesteps) != len(self.vcm_timesteps) - 1:
            raise ValueError(
                f"need len(icm_timesteps) == len(vcm_timesteps) - 1 "
                f"(the final iteration skips the image prior), got "
                f"{len(self.icm_timesteps)} and {len(self.vcm_timesteps)}")
        if self.step_vcm <= 0 or self.step_icm <= 0:
            raise ValueError("step sizes must be positive")
        if self.sigma_n <= 0:
            raise ValueError("sigma_n must be positive")
        if self.tv_solver not in ("pdhg", "adam"):
            raise ValueError(f"unknown tv_solver {self.tv_solver!r}")
        if self.init not in ("pseudo-inverse", "file"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "file" and self.init_tensor is None:
            raise ValueError("init='file' requires init_tensor")

    def active_schedules(self):
        """File init drops the first (noisiest) step of each schedule."""
        if self.init == "file" and len(self.vcm_timesteps) > 1:
            return tuple(self.vcm_timesteps[1:]), tuple(self.icm_timesteps[1:])
        return tuple(self.vcm_timesteps), tuple(self.icm_timesteps)


@dataclass
class IterationRecord:
    k: int
    residual: float
    tv: float
    nfe: int
    ms: float


@dataclass
class RunReport:
    sampler: str
    iterations: list = field(default_factory=list)
    nfe: int = 0
    wall_time_s: float = 0.0
    init_residual: float = 0.0
    notes: str = ""
    primal_residuals: list = field(default_factory=list)  # ADMM only

    def record(self, k, residual, tv, ms):
        self.iterations.append(IterationRecord(k, float(residual), float(tv), self.nfe, float(ms)))

    @property
    def final_residual(self) -> float:
        return self.iterations[-1].residual if self.iterations else self.init_residual


def _rng_for(seed: int, role: int, k: int, frame: int = 0):
    return np.random.SeedSequence((int(seed) & 0xFFFFFFFF, role, k, frame)).generate_state(1)[0]


def _thread_count() -> int:
    raw = os.environ.get("LAVINO_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_frames(fn, n_frames: int):
    """Data-parallel per-frame map; LAVINO_THREADS caps the worker count."""
    workers = min(_thread_count(), n_frames)
    if workers <= 1:
        return [fn(t) for t in range(n_frames)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_frames)))


def _residual(A: BoundOp, x, y) -> float:
    return float(np.linalg.norm(A.apply(x) - y))


def _initialize(A: BoundOp, y, cfg: SamplerConfig) -> np.ndarray:
    if cfg.init == "file":
        x0 = as_video_array(cfg.init_tensor)
        if x0.shape != A.in_shape:
            raise ValueError(
                f"init file tensor has shape {x0.shape}, operator expects {A.in_shape}")
        return np.array(x0, copy=True)
    return pseudo_inverse_init(A, y)


def _tv_likelihood_prox(A, y, u, cfg: SamplerConfig, delta_eta: float) -> np.ndarray:
    if cfg.tv_weights.is_zero():
        return prox_quadratic(A, y, u, delta_eta / (cfg.sigma_n ** 2), cfg.cg)
    if cfg.tv_solver == "pdhg":
        return prox_tv_data_pdhg(A, y, u, cfg.tv_weights, delta_eta,
                                 cfg.pdhg, cfg.cg, sigma_n=cfg.sigma_n)
    return prox_tv_data_adam(A, y, u, cfg.tv_weights, delta_eta,
                             cfg.adam, sigma_n=cfg.sigma_n)


def _icm_framewise(icm: Prior, x: np.ndarray, t: int, cfg: SamplerConfig, k: int) -> np.ndarray:
    """Apply the image prior frame by frame with independent per-frame noise."""
    def one(fr):
        frame = x[fr:fr + 1]
        return sae_step(icm, frame, t, _rng_for(cfg.seed, _ROLE_ICM, k, fr))[0]

    return np.stack(_map_frames(one, x.shape[0]), axis=0)


def latino_restore(y, A: BoundOp, vcm: Prior, icm: Prior,
                   cfg: SamplerConfig) -> tuple[np.ndarray, RunReport]:
    """Full split-Langevin sampler with video and image priors plus TV."""
    y = as_video_array(y)
    vcm_ts, icm_ts = cfg.active_schedules()
    n = len(vcm_ts)
    report = RunReport(sampler="latino")
    t_start = time.perf_counter()
    x = _initialize(A, y, cfg)
    report.init_residual = _residual(A, x, y)
    if cfg.init == "file":
        report.notes = "file init"

    for k in range(n):
        it_start = time.perf_counter()
        try:
            x = sae_step(vcm, x, vcm_ts[k], _rng_for(cfg.seed, _ROLE_VCM, k))
            report.nfe += 1
            x = _tv_likelihood_prox(A, y, x, cfg, cfg.step_vcm)
            if k < n - 1:
                # one NFE for the whole frame stack
                x = _icm_framewise(icm, x, icm_ts[k], cfg, k)
                report.nfe += 1
                x = prox_quadratic(A, y, x, cfg.step_icm / (cfg.sigma_n ** 2), cfg.cg)
        except Exception as e:
            raise RuntimeError(f"sampler failed at iteration {k}: {e}") from e
        report.record(k, _residual(A, x, y), tv3(x, cfg.tv_weights),
                      1e3 * (time.perf_counter() - it_start))
    report.wall_time_s = time.perf_counter() - t_start
    return x, report


def latino_v_restore(y, A: BoundOp, vcm: Prior,
                     cfg: SamplerConfig) -> tuple[np.ndarray, RunReport]:
    """Video-prior-only variant: one SAE step and one likelihood prox per iteration."""
    y = as_video_array(y)
    vcm_ts, _ = cfg.active_schedules()
    report = RunReport(sampler="latino-v")
    t_start = time.perf_counter()
    x = _initialize(A, y, cfg)
    report.init_residual = _residual(A, x, y)
    if cfg.init == "file":
        report.notes = "file init"

    for k, t in enumerate(vcm_ts):
        it_start = time.perf_counter()
        try:
            x = sae_step(vcm, x, t, _rng_for(cfg.seed, _ROLE_VCM, k))
            report.nfe += 1
            x = _tv_likelihood_prox(A, y, x, cfg, cfg.step_vcm)
        except Exception as e:
            raise RuntimeError(f"sampler failed at iteration {k}: {e}") from e
        report.record(k, _residual(A, x, y), tv3(x, cfg.tv_weights),
                      1e3 * (time.perf_counter() - it_start))
    report.wall_time_s = time.perf_counter() - t_start
    return x, report


def latino_image_restore(y_frame, A: BoundOp, icm: Prior,
                         cfg: SamplerConfig) -> tuple[np.ndarray, RunReport]:
    """Single-frame loop: SAE step then quadratic prox, over the image schedule."""
    y = as_video_array(y_frame)
    report = RunReport(sampler="latino-image")
    t_start = time.perf_counter()
    x = _initialize(A, y, cfg)
    report.init_residual = _residual(A, x, y)

    for k, t in enumerate(cfg.icm_timesteps):
        it_start = time.perf_counter()
        try:
            x = np.stack([sae_step(icm, x[0:1], t, _rng_for(cfg.seed, _ROLE_ICM, k, 0))[0]])
            report.nfe += 1
            x = prox_quadratic(A, y, x, cfg.step_icm / (cfg.sigma_n ** 2), cfg.cg)
        except Exception as e:
            raise RuntimeError(f"sampler failed at iteration {k}: {e}") from e
        report.record(k, _residual(A, x, y), tv3(x, cfg.tv_weights),
                      1e3 * (time.perf_counter() - it_start))
    report.wall_time_s = time.perf_counter() - t_start
    return x, report


@dataclass(frozen=True)
class VisionXLConfig:
    rho_fraction: float = 0.3
    cg_iters: int = 5              # data-consistency refinement steps per level
    sigma_max: float = 2.0         # low-pass width at the start, decaying to 0
    sigma_n: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.rho_fraction <= 1.0:
            raise ValueError("rho_fraction must lie in (0, 1]")
        if self.cg_iters < 1:
            raise ValueError("cg_iters must be >= 1")


def _cg_data_refine(A: BoundOp, y, x0, iters: int) -> np.ndarray:
    """l CG iterations on min ||Ax - y||^2 starting from x0 (normal equations)."""
    b = A.adjoint(y)
    params = CGParams(max_iters=iters, tol=1e-12)
    return cg_solve(A.gram, b, x0, params)


def vision_xl_restore(y, A: BoundOp, prior: Prior,
                      cfg: VisionXLConfig | None = None) -> tuple[np.ndarray, RunReport]:
    """Latent-inversion baseline driven entirely by the prior's eps-predictor."""
    cfg = cfg or VisionXLConfig()
    if prior.eps_predictor is None:
        raise ValueError("vision-xl requires a prior with an eps-predictor")
    y = as_video_array(y)
    sched = prior.schedule
    abar = sched.alpha_bar
    rho = int(round(cfg.rho_fraction * sched.total_steps))
    rho = max(2, min(rho, sched.total_steps))
    report = RunReport(sampler="vision-xl")
    t_start = time.perf_counter()

    x_init = y if tuple(y.shape) == tuple(A.in_shape) else pseudo_inverse_init(A, y)
    report.init_residual = _residual(A, x_init, y)

    # pseudo-batch inversion: deterministic forward DDIM of the encoded measurement
    z = np.asarray(prior.encode(x_init), dtype=np.float64)
    z = np.sqrt(abar[1]) * z  # 0 -> 1 lift; the eps-predictor is undefined at t=0
    for t in range(1, rho):
        eps = np.asarray(prior.eps_predictor(z, t), dtype=np.float64)
        report.nfe += 1
        z0_hat = (z - np.sqrt(1.0 - abar[t]) * eps) / np.sqrt(abar[t])
        z = np.sqrt(abar[t + 1]) * z0_hat + np.sqrt(1.0 - abar[t + 1]) * eps

    sigmas = np.linspace(cfg.sigma_max, 0.0, max(rho - 1, 1))
    rng = np.random.default_rng(cfg.seed)

    for i, t in enumerate(range(rho, 1, -1)):
        it_start = time.perf_counter()
        eps = np.asarray(prior.eps_predictor(z, t), dtype=np.float64)
        report.nfe += 1
        z_hat = (z - np.sqrt(1.0 - abar[t]) * eps) / np.sqrt(abar[t])      # Tweedie
        x_hat = np.asarray(prior.decode(z_hat), dtype=np.float64)
        x_bar = _cg_data_refine(A, y, x_hat, cfg.cg_iters)
        sigma_t = float(sigmas[i]) if i < len(sigmas) else 0.0
        if sigma_t > 0:
            x_bar = separable_blur(x_bar, sigma_t, 0.0)                    # low-pass
        report.record(t, _residual(A, x_bar, y), 0.0,
                      1e3 * (time.perf_counter() - it_start))
        z_bar = np.asarray(prior.encode(x_bar), dtype=np.float64)
        noise = rng.standard_normal(z_bar.shape[1:])                       # batch-shared
        z = np.sqrt(abar[t - 1]) * z_bar + np.sqrt(1.0 - abar[t - 1]) * noise[None, ...]

    eps = np.asarray(prior.eps_predictor(z, 1), dtype=np.float64)
    report.nfe += 1
    z0 = (z - np.sqrt(1.0 - abar[1]) * eps) / np.sqrt(abar[1])
    x = np.asarray(prior.decode(z0), dtype=np.float64)
    report.record(1, _residual(A, x, y), 0.0, 0.0)
    report.wall_time_s = time.perf_counter() - t_start
    return x, report


def group_soft_threshold(q: np.ndarray, threshold: float) -> np.ndarray:
    """Per-voxel shrinkage of the trailing 3-vector: zero below the threshold."""
    norm = np.sqrt((q * q).sum(axis=-1))
    scale = np.maximum(0.0, 1.0 - threshold / np.maximum(norm, 1e-300))
    return q * scale[..., None]


def admm_tv_restore(y, A: BoundOp, w: TVWeights, rho_admm: float = 1.0,
                    iters: int = 50, sigma_n: float = 1e-3,
                    cg: CGParams | None = None) -> tuple[np.ndarray, RunReport]:
    """ADMM on (1/2 sigma^2)||Ax-y||^2 + TV_w(x) with splitting v = D_w x."""
    if rho_admm <= 0:
        raise ValueError("rho_admm must be > 0")
    y = as_video_array(y)
    cg = cg or CGParams()
    report = RunReport(sampler="admm-tv")
    t_start = time.perf_counter()
    x = pseudo_inverse_init(A, y)
    report.init_residual = _residual(A, x, y)

    inv_s2 = 1.0 / (sigma_n * sigma_n)
    aty = A.adjoint(y)
    v = grad3(x, w)
    dual = np.zeros_like(v)

    def matvec(u):
        return inv_s2 * A.gram(u) + rho_admm * div3(grad3(u, w), w)

    for k in range(iters):
        it_start = time.perf_counter()
        b = inv_s2 * aty + rho_admm * div3(v - dual, w)
        x = cg_solve(matvec, b, x, cg)
        dx = grad3(x, w)
        v = group_soft_threshold(dx + dual, 1.0 / rho_admm)
        dual += dx - v
        report.primal_residuals.append(float(np.linalg.norm(dx - v)))
        report.record(k, _residual(A, x, y), tv3(x, w),
                      1e3 * (time.perf_counter() - it_start))
    report.wall_time_s = time.perf_counter() - t_start
    return x, report
