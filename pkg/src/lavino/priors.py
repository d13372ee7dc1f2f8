"""The stochastic-autoencoder prior contract and its built-in instances.

A prior bundles a codec (encode/decode), a noise schedule, a consistency
function f(z_t, t) -> z_0-estimate, and optionally an eps-predictor.  The SAE
step diffuses the encoded state to noise level t and maps it back in one call:

    z = sqrt(abar_t) * E(x) + sqrt(1 - abar_t) * eps,   u = D(f(z, t)).

Built-in priors use the identity codec in pixel space.  The Gaussian prior is
analytically exact (its consistency function is the closed-form endpoint map
of the probability-flow ODE for a Gaussian target); the smoothing prior is a
qualitative blur denoiser for end-to-end smoke runs.  Real latent models
attach through the wire protocol in :mod:`lavino.wire`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.ndimage import convolve1d

from .wire import OP_CONSISTENCY, OP_EPS_PREDICT, PriorClient


@dataclass(frozen=True)
class AlphaSchedule:
    """Linear-beta variance-preserving schedule.

    abar[t] = prod_{i<t} (1 - beta_i) for t = 0..total_steps, so abar[0] is
    exactly 1 and abar[total_steps] is close to 0.  Timesteps are integers
    indexing this array; fractional t is rejected rather than interpolated.
    """

    total_steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    betas: np.ndarray = field(init=False, repr=False)
    alpha_bar: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        betas = np.linspace(self.beta_start, self.beta_end, self.total_steps)
        abar = np.empty(self.total_steps + 1)
        abar[0] = 1.0
        np.cumprod(1.0 - betas, out=abar[1:])
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alpha_bar", abar)

    def validate_t(self, t) -> int:
        ti = int(t)
        if ti != t:
            raise ValueError(f"timesteps are integers, got {t!r}")
        if not 0 <= ti <= self.total_steps:
            raise ValueError(f"timestep {ti} out of range [0, {self.total_steps}]")
        return ti

    def abar(self, t) -> float:
        return float(self.alpha_bar[self.validate_t(t)])


@dataclass
class Prior:
    """SAE contract: codec + schedule + consistency (+ optional eps-predictor)."""

    consistency: Callable  # (z_t, t) -> z_0 estimate
    schedule: AlphaSchedule = field(default_factory=AlphaSchedule)
    encode: Callable = None
    decode: Callable = None
    eps_predictor: Callable | None = None
    latent_shape: tuple | None = None  # None = same as input
    name: str = "prior"

    def __post_init__(self):
        if self.encode is None:
            self.encode = lambda x: x
        if self.decode is None:
            self.decode = lambda z: z


def sae_step(prior: Prior, x: np.ndarray, t: int, seed) -> np.ndarray:
    """One stochastic-autoencoder step: encode, diffuse to level t, map back, decode."""
    sched = prior.schedule
    ti = sched.validate_t(t)
    abar = sched.abar(ti)
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(prior.encode(x), dtype=np.float64)
    if prior.latent_shape is not None and tuple(z.shape) != tuple(prior.latent_shape):
        raise ValueError(
            f"latent shape mismatch: prior declares {tuple(prior.latent_shape)}, "
            f"encoder produced {z.shape}")
    noise_coeff = np.sqrt(1.0 - abar)
    if noise_coeff > 0.0:
        rng = np.random.default_rng(seed)
        z = np.sqrt(abar) * z + noise_coeff * rng.standard_normal(z.shape)
    else:
        z = np.sqrt(abar) * z
    z0 = np.asarray(prior.consistency(z, ti), dtype=np.float64)
    if z0.shape != z.shape:
        raise ValueError(f"consistency changed latent shape {z.shape} -> {z0.shape}")
    return np.asarray(prior.decode(z0), dtype=np.float64)


# ---------------------------------------------------------------------------
# Gaussian prior (analytically exact)

@dataclass(frozen=True)
class GaussianPriorSpec:
    """Target N(mean, std^2 I) with the identity codec."""

    mean: float | np.ndarray = 0.0
    std: float = 1.0

    def __post_init__(self):
        if self.std <= 0:
            raise ValueError(f"std must be > 0, got {self.std}")


def gaussian_consistency(z_t, t, spec: GaussianPriorSpec, schedule: AlphaSchedule):
    """Exact endpoint map of the probability-flow ODE for a Gaussian target.

    The diffused marginal at level t is N(sqrt(abar)*mu, abar s^2 + 1 - abar);
    the flow conserves the standardized coordinate, so the map back to t=0 is

        mu + (z_t - sqrt(abar)*mu) * s / sqrt(abar s^2 + 1 - abar).
    """
    abar = schedule.abar(t)
    s = spec.std
    var_t = abar * s * s + 1.0 - abar
    return spec.mean + (np.asarray(z_t, dtype=np.float64) - np.sqrt(abar) * spec.mean) * (
        s / np.sqrt(var_t))


def gaussian_posterior_mean(z_t, t, spec: GaussianPriorSpec, schedule: AlphaSchedule):
    """E[z_0 | z_t] for the Gaussian target: the Tweedie denoiser."""
    abar = schedule.abar(t)
    s2 = spec.std * spec.std
    var_t = abar * s2 + 1.0 - abar
    gain = np.sqrt(abar) * s2 / var_t
    return spec.mean + gain * (np.asarray(z_t, dtype=np.float64) - np.sqrt(abar) * spec.mean)


def gaussian_eps_predict(z_t, t, spec: GaussianPriorSpec, schedule: AlphaSchedule):
    """Noise estimate consistent with the posterior mean through Tweedie inversion."""
    ti = schedule.validate_t(t)
    abar = schedule.abar(ti)
    if abar >= 1.0:
        raise ValueError("eps-prediction undefined at t = 0 (zero noise level)")
    z0 = gaussian_posterior_mean(z_t, ti, spec, schedule)
    return (np.asarray(z_t, dtype=np.float64) - np.sqrt(abar) * z0) / np.sqrt(1.0 - abar)


def gaussian_prior(spec: GaussianPriorSpec | None = None,
                   schedule: AlphaSchedule | None = None) -> Prior:
    spec = spec or GaussianPriorSpec()
    schedule = schedule or AlphaSchedule()
    return Prior(
        consistency=lambda z, t: gaussian_consistency(z, t, spec, schedule),
        eps_predictor=lambda z, t: gaussian_eps_predict(z, t, spec, schedule),
        schedule=schedule,
        name=f"gaussian(mean,std={spec.std:g})",
    )


# ---------------------------------------------------------------------------
# Smoothing prior (qualitative stand-in denoiser)

def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Discrete Gaussian taps truncated at 3 sigma, normalized to sum 1."""
    if sigma <= 0:
        return np.array([1.0])
    radius = max(1, int(np.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def separable_blur(x: np.ndarray, sigma_spatial: float, sigma_temporal: float) -> np.ndarray:
    """Gaussian blur along (t, h, w) with replicate boundary; constants pass through."""
    out = np.asarray(x, dtype=np.float64)
    if sigma_spatial > 0:
        k = gaussian_kernel1d(sigma_spatial)
        out = convolve1d(out, k, axis=1, mode="nearest")
        out = convolve1d(out, k, axis=2, mode="nearest")
    if sigma_temporal > 0 and x.shape[0] > 1:
        kt = gaussian_kernel1d(sigma_temporal)
        out = convolve1d(out, kt, axis=0, mode="nearest")
    return out


def smoothing_consistency(z_t, t, schedule: AlphaSchedule):
    """Rescale by 1/sqrt(abar), then blur with a width tied to the noise level."""
    abar = schedule.abar(t)
    z = np.asarray(z_t, dtype=np.float64) / np.sqrt(abar)
    sigma = 2.0 * np.sqrt(1.0 - abar) / np.sqrt(abar)
    return separable_blur(z, sigma, sigma / 2.0)


def smoothing_prior(schedule: AlphaSchedule | None = None) -> Prior:
    schedule = schedule or AlphaSchedule()
    return Prior(
        consistency=lambda z, t: smoothing_consistency(z, t, schedule),
        schedule=schedule,
        name="smoothing",
    )


def identity_prior(schedule: AlphaSchedule | None = None) -> Prior:
    """Pass-through consistency; useful for saturation and protocol tests."""
    schedule = schedule or AlphaSchedule()
    return Prior(consistency=lambda z, t: z, schedule=schedule, name="identity")


# ---------------------------------------------------------------------------
# External priors over the wire protocol

def external_prior_connect(command_line: str, model_id: str,
                           schedule: AlphaSchedule | None = None,
                           timeout: float | None = None) -> Prior:
    """Spawn a prior server and wrap its consistency/eps calls as a Prior.

    The codec stays the identity on this side; if the server declares a latent
    shape it must match the tensors we send (shapes are validated on every
    exchange).  Call ``prior.close()`` (or use the client as a context manager
    via ``prior.client``) when done.
    """
    schedule = schedule or AlphaSchedule()
    kwargs = {} if timeout is None else {"timeout": timeout}
    client = PriorClient(command_line, model_id, **kwargs)
    prior = Prior(
        consistency=lambda z, t: client.call(OP_CONSISTENCY, z, t),
        eps_predictor=lambda z, t: client.call(OP_EPS_PREDICT, z, t),
        schedule=schedule,
        latent_shape=client.latent_shape,
        name=f"external:{model_id}",
    )
    prior.client = client
    prior.close = client.close
    return prior
