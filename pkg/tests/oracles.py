"""Independent oracles used by the test suite.

Each oracle recomputes an expected value by a route disjoint from the
implementation it checks: dense linear algebra, direct index loops, an exact
1-D TV prox (taut string), windowed-statistics SSIM, and RK4 integration of
the probability-flow ODE with the exact Gaussian score.
"""

import numpy as np


def dense_matrix(op):
    """Materialize a bound operator column by column (via apply only)."""
    n = int(np.prod(op.in_shape))
    m = int(np.prod(op.out_shape))
    mat = np.zeros((m, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        mat[:, j] = op.apply(e.reshape(op.in_shape)).ravel()
        e[j] = 0.0
    return mat


def dense_adjoint_matrix(op):
    """Materialize the adjoint column by column (via adjoint only)."""
    n = int(np.prod(op.in_shape))
    m = int(np.prod(op.out_shape))
    mat = np.zeros((n, m))
    e = np.zeros(m)
    for j in range(m):
        e[j] = 1.0
        mat[:, j] = op.adjoint(e.reshape(op.out_shape)).ravel()
        e[j] = 0.0
    return mat


def circular_conv_loop(x, w):
    """Direct loop circular convolution with the centered length-w uniform kernel."""
    t = x.shape[0]
    r = w // 2
    out = np.zeros_like(x)
    for i in range(t):
        for d in range(-r, r + 1):
            out[i] += x[(i + d) % t]
    return out / w


def grad3_loop(x, lams):
    """Index-wise weighted forward differences; component order (h, v, t)."""
    lam_h, lam_v, lam_t = lams
    t, h, w, c = x.shape
    g = np.zeros((t, h, w, c, 3))
    for a in range(t):
        for i in range(h):
            for j in range(w):
                for ch in range(c):
                    if i + 1 < h:
                        g[a, i, j, ch, 0] = lam_h * (x[a, i + 1, j, ch] - x[a, i, j, ch])
                    if j + 1 < w:
                        g[a, i, j, ch, 1] = lam_v * (x[a, i, j + 1, ch] - x[a, i, j, ch])
                    if a + 1 < t:
                        g[a, i, j, ch, 2] = lam_t * (x[a + 1, i, j, ch] - x[a, i, j, ch])
    return g


def tv3_loop(x, lams):
    g = grad3_loop(x, lams)
    return float(np.sqrt((g * g).sum(axis=-1)).sum())


def tv1d_prox(y, lam):
    """Exact argmin_x (1/2)||x - y||^2 + lam * sum |x_{i+1} - x_i|.

    Taut-string construction (the direct non-iterative algorithm): tracks the
    running tube [vmin, vmax] and segment boundaries, exact up to float
    arithmetic.  Validated against the KKT conditions in the suite.
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n == 0:
        return np.empty(0)
    if lam <= 0 or n == 1:
        return y.astype(np.float64).copy()
    x = np.empty(n)
    k = k0 = km = kp = 0
    vmin = y[0] - lam
    vmax = y[0] + lam
    umin = lam
    umax = -lam
    while True:
        if k == n - 1:
            if umin < 0:
                x[k0:km + 1] = vmin
                k = k0 = km = km + 1
                vmin = y[k]
                umin = lam
                umax = y[k] + lam - vmax
                continue
            if umax > 0:
                x[k0:kp + 1] = vmax
                k = k0 = kp = kp + 1
                vmax = y[k]
                umax = -lam
                umin = y[k] - lam - vmin
                continue
            x[k0:n] = vmin + umin / (k - k0 + 1)
            return x
        if y[k + 1] + umin < vmin - lam:
            # taut string must jump down: freeze the segment at vmin
            x[k0:km + 1] = vmin
            k = k0 = km = kp = km + 1
            vmin = y[k]
            vmax = y[k] + 2 * lam
            umin = lam
            umax = -lam
        elif y[k + 1] + umax > vmax + lam:
            # taut string must jump up: freeze the segment at vmax
            x[k0:kp + 1] = vmax
            k = k0 = km = kp = kp + 1
            vmin = y[k] - 2 * lam
            vmax = y[k]
            umin = lam
            umax = -lam
        else:
            k += 1
            umin += y[k] - vmin
            umax += y[k] - vmax
            if umin >= lam:
                vmin += (umin - lam) / (k - k0 + 1)
                umin = lam
                km = k
            if umax <= -lam:
                vmax += (umax + lam) / (k - k0 + 1)
                umax = -lam
                kp = k


def tv1d_kkt_gap(y, lam, x):
    """Max KKT violation of a candidate 1-D TV prox solution (0 iff optimal).

    Stationarity gives the dual s_j = (1/lam) * sum_{i<=j} (x_i - y_i); the
    candidate is optimal iff all |s_j| <= 1, the total mass matches, and
    s_j = sign(x_{j+1} - x_j) wherever the difference is nonzero.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    n = len(y)
    if n <= 1 or lam <= 0:
        return float(np.abs(x - y).max(initial=0.0))
    s = np.cumsum(x - y) / lam
    gap = abs(s[-1]) * lam                       # total-mass consistency
    gap = max(gap, float(np.maximum(np.abs(s[:-1]) - 1.0, 0.0).max(initial=0.0)))
    d = np.diff(x)
    active = np.abs(d) > 1e-9
    if active.any():
        gap = max(gap, float(np.abs(s[:-1][active] - np.sign(d[active])).max()))
    return gap


def naive_ssim_frame(a, b, window=11, sigma=1.5, k1=0.01, k2=0.03):
    """Double-loop single-frame SSIM over fully interior window positions."""
    r = window // 2
    g1 = np.exp(-0.5 * (np.arange(-r, r + 1) / sigma) ** 2)
    k = np.outer(g1, g1)
    k /= k.sum()
    c1 = k1 * k1
    c2 = k2 * k2
    h, w = a.shape[:2]
    vals = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        acc = []
        for i in range(r, h - r):
            for j in range(r, w - r):
                px = x[i - r:i + r + 1, j - r:j + r + 1]
                py = y[i - r:i + r + 1, j - r:j + r + 1]
                mx = (k * px).sum()
                my = (k * py).sum()
                vx = (k * px * px).sum() - mx * mx
                vy = (k * py * py).sum() - my * my
                cxy = (k * px * py).sum() - mx * my
                acc.append(((2 * mx * my + c1) * (2 * cxy + c2)) /
                           ((mx * mx + my * my + c1) * (vx + vy + c2)))
        vals.append(np.mean(acc))
    return float(np.mean(vals))


def rk4_pf_ode_endpoint(z_t, t, mean, std, schedule, steps=10_000):
    """Integrate the probability-flow ODE from level t back to 0.

    The continuous extension of the discrete schedule uses piecewise-constant
    beta_tilde(tau) = -log(1 - beta_floor(tau)), so exp(-integral) reproduces
    the discrete alpha_bar products exactly at integer times.  The score is
    the exact Gaussian one: the marginal at tau is
    N(sqrt(abar) * mean, abar std^2 + 1 - abar).
    """
    g = -np.log1p(-schedule.betas)           # g_i = -log(1 - beta_i)
    gcum = np.concatenate([[0.0], np.cumsum(g)])

    def abar(tau):
        i = min(int(np.floor(tau)), len(g) - 1)
        return np.exp(-(gcum[i] + (tau - i) * g[i]))

    def beta_tilde(tau):
        i = min(int(np.floor(tau)), len(g) - 1)
        return g[i]

    def f(x, tau):
        ab = abar(tau)
        m = np.sqrt(ab) * mean
        v = ab * std * std + 1.0 - ab
        score = -(x - m) / v
        return -0.5 * beta_tilde(tau) * (x + score)

    x = np.asarray(z_t, dtype=np.float64).copy()
    h = -float(t) / steps
    tau = float(t)
    for _ in range(steps):
        k1 = f(x, tau)
        k2 = f(x + 0.5 * h * k1, tau + 0.5 * h)
        k3 = f(x + 0.5 * h * k2, tau + 0.5 * h)
        k4 = f(x + h * k3, tau + h)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        tau += h
    return x
