"""Proximal steps for the quadratic likelihood and its TV-regularized variant.

Three solvers:

* ``cg_solve`` - conjugate gradient on a self-adjoint positive-definite
  operator, used for every normal-equation system here.
* ``prox_tv_data_pdhg`` - Chambolle-Pock primal-dual iterations for the
  temporally TV-regularized data term (pure temporal weights only).
* ``prox_tv_data_adam`` - Adam descent on the same objective with the TV term
  smoothed, for mixed spatial/temporal weights.

The quadratic prox argmin (eps/2)||Ax-y||^2 + (1/2)||x-u||^2 reduces to the
normal equations (Id + eps A^T A) x = u + eps A^T y, warm-started at u.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import BoundOp
from .regularizers import TVWeights, div3, grad3, grad3_norm, tv3, tv3_smoothed

# above this trust weight the quadratic anchor term is numerically irrelevant
# and the TV subproblem drops it
TRUST_DROP_THRESHOLD = 1e5


@dataclass(frozen=True)
class CGParams:
    max_iters: int = 10
    tol: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")


@dataclass(frozen=True)
class PDHGParams:
    iters: int = 200
    rho: float | None = None     # primal step; None = 0.99 / ||D||
    sigma: float | None = None   # dual step; None = 0.99 / ||D||
    theta: float = 1.0

    def __post_init__(self):
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")


@dataclass(frozen=True)
class AdamParams:
    lr: float = 1e-3
    iters: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be > 0")


@dataclass
class SolveInfo:
    iterations: int = 0
    converged: bool = False
    residual_history: list = field(default_factory=list)


def cg_solve(matvec, b: np.ndarray, x0: np.ndarray, params: CGParams,
             info: SolveInfo | None = None) -> np.ndarray:
    """CG for M x = b with M self-adjoint positive definite.

    Stops after max_iters or once ||r|| / ||b|| <= tol.  Raises on non-finite
    values, which signal an indefinite or mis-specified operator.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    b = np.asarray(b, dtype=np.float64)
    bnorm = np.linalg.norm(b)
    r = b - matvec(x)
    rnorm = np.linalg.norm(r)
    if info is not None:
        info.residual_history.append(rnorm)
    if bnorm == 0.0:
        bnorm = 1.0
    if rnorm / bnorm <= params.tol:
        if info is not None:
            info.converged = True
        return x
    p = r.copy()
    rs = float(rnorm * rnorm)
    for it in range(params.max_iters):
        mp = matvec(p)
        denom = float(np.vdot(p, mp).real)
        if not np.isfinite(denom) or denom <= 0.0:
            raise FloatingPointError(
                f"CG curvature {denom!r} at iteration {it}: operator not positive definite")
        alpha = rs / denom
        x += alpha * p
        r -= alpha * mp
        rs_new = float(np.vdot(r, r).real)
        if not np.isfinite(rs_new):
            raise FloatingPointError(f"CG produced non-finite residual at iteration {it}")
        rnorm = np.sqrt(rs_new)
        if info is not None:
            info.iterations = it + 1
            info.residual_history.append(rnorm)
        if rnorm / bnorm <= params.tol:
            if info is not None:
                info.converged = True
            return x
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


def prox_quadratic(A: BoundOp, y: np.ndarray, u: np.ndarray, epsilon: float,
                   params: CGParams | None = None, x0: np.ndarray | None = None,
                   info: SolveInfo | None = None) -> np.ndarray:
    """argmin_x (eps/2)||Ax-y||^2 + (1/2)||x-u||^2 via warm-started CG.

    epsilon absorbs the step size and the noise variance at the call site.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    params = params or CGParams()
    u = np.asarray(u, dtype=np.float64)
    b = u + epsilon * A.adjoint(y)
    matvec = lambda x: x + epsilon * A.gram(x)
    return cg_solve(matvec, b, u if x0 is None else x0, params, info)


def _check_tv_inputs(delta_eta, sigma_n):
    if delta_eta <= 0:
        raise ValueError(f"delta_eta must be > 0, got {delta_eta}")
    if sigma_n <= 0:
        raise ValueError(f"sigma_n must be > 0, got {sigma_n}")


def tv_data_objective(A: BoundOp, y, x, u, w: TVWeights, delta_eta: float,
                      sigma_n: float, drop_trust: bool) -> float:
    """(1/2 sigma^2)||Ax-y||^2 + TV(x) [+ (1/2 delta_eta)||x-u||^2]."""
    r = A.apply(x) - y
    val = 0.5 / (sigma_n * sigma_n) * float(np.vdot(r, r).real) + tv3(x, w)
    if not drop_trust:
        d = x - u
        val += 0.5 / delta_eta * float(np.vdot(d, d).real)
    return val


def prox_tv_data_pdhg(A: BoundOp, y, u, w: TVWeights, delta_eta: float,
                      params: PDHGParams | None = None, cg: CGParams | None = None,
                      sigma_n: float = 1.0, drop_trust: bool | None = None) -> np.ndarray:
    """TV-regularized likelihood prox by Chambolle-Pock, pure temporal TV only.

    Minimizes (1/2 sigma_n^2)||Ax-y||^2 + TV_w(x) + (1/2 delta_eta)||x-u||^2.
    The trust term is dropped when delta_eta >= 1e5 (it is numerically inert
    there); pass drop_trust explicitly to override.  The dual variable lives in
    the per-voxel unit l2 ball; primal subproblems are warm-started CG solves.
    """
    _check_tv_inputs(delta_eta, sigma_n)
    if not w.is_pure_temporal():
        raise ValueError(
            f"PDHG path requires pure temporal TV (lambda_h = lambda_v = 0), got {w}; "
            "use the Adam variant for spatial weights")
    u = np.asarray(u, dtype=np.float64)
    if w.is_zero():
        return prox_quadratic(A, y, u, delta_eta / (sigma_n * sigma_n), cg)
    params = params or PDHGParams()
    cg = cg or CGParams()
    if drop_trust is None:
        drop_trust = delta_eta >= TRUST_DROP_THRESHOLD

    dnorm = grad3_norm(u.shape, w)
    if params.rho is None or params.sigma is None:
        step = 0.99 / dnorm if dnorm > 0 else 1.0
        rho = params.rho if params.rho is not None else step
        sigma = params.sigma if params.sigma is not None else step
    else:
        rho, sigma = params.rho, params.sigma
    if rho * sigma * dnorm * dnorm >= 1.0:
        raise ValueError(
            f"PDHG step sizes violate rho*sigma*||D||^2 < 1 "
            f"(rho={rho:g}, sigma={sigma:g}, ||D||={dnorm:g})")

    inv_s2 = 1.0 / (sigma_n * sigma_n)
    aty = A.adjoint(y)
    x = u.copy()
    xbar = x.copy()
    p = np.zeros(u.shape + (3,))

    for _ in range(params.iters):
        # dual ascent + projection onto the per-voxel unit ball
        p += sigma * grad3(xbar, w)
        norm = np.sqrt((p * p).sum(axis=-1))
        p /= np.maximum(1.0, norm)[..., None]

        # primal: prox_{rho f} at z = x - rho D^T p via normal equations
        z = x - rho * div3(p, w)
        if drop_trust:
            b = z + rho * inv_s2 * aty
            matvec = lambda v: v + rho * inv_s2 * A.gram(v)
        else:
            b = z + rho * (inv_s2 * aty + u / delta_eta)
            matvec = lambda v: v * (1.0 + rho / delta_eta) + rho * inv_s2 * A.gram(v)
        x_new = cg_solve(matvec, b, x, cg)

        xbar = x_new + params.theta * (x_new - x)
        x = x_new
    return x


def prox_tv_data_adam(A: BoundOp, y, u, w: TVWeights, delta_eta: float,
                      params: AdamParams | None = None, sigma_n: float = 1.0,
                      drop_trust: bool | None = None, mu: float = 1e-8) -> np.ndarray:
    """Same objective as the PDHG variant, minimized by Adam on a smoothed TV.

    TV is smoothed as sqrt(|g|^2 + mu^2) - mu so the objective is differentiable
    at zero gradient; the whole descent is deterministic.
    """
    _check_tv_inputs(delta_eta, sigma_n)
    params = params or AdamParams()
    if drop_trust is None:
        drop_trust = delta_eta >= TRUST_DROP_THRESHOLD
    u = np.asarray(u, dtype=np.float64)
    inv_s2 = 1.0 / (sigma_n * sigma_n)

    x = u.copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    for it in range(1, params.iters + 1):
        g = inv_s2 * A.adjoint(A.apply(x) - y)
        if not w.is_zero():
            _, tv_grad = tv3_smoothed(x, w, mu)
            g += tv_grad
        if not drop_trust:
            g += (x - u) / delta_eta
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient at Adam iteration {it}")
        m = params.beta1 * m + (1 - params.beta1) * g
        v = params.beta2 * v + (1 - params.beta2) * g * g
        mhat = m / (1 - params.beta1 ** it)
        vhat = v / (1 - params.beta2 ** it)
        x = x - params.lr * mhat / (np.sqrt(vhat) + params.eps)
    return x
