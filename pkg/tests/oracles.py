"""Independent reference computations used only by the tests.

Nothing here imports the solver internals it is used to check: the network
Jacobian is built by finite differences of a separately written vector
field, kernel moments come from adaptive quadrature of the densities, and
the gamma-kernel integrator convolves stored history directly instead of
using auxiliary chain variables.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad


def logistic(x, a):
    return 1.0 / (1.0 + np.exp(-a * np.asarray(x, dtype=float)))


def node_field(e, i, w, drive, p, a, tau1, tau2, w_ie):
    de = (-e + logistic(drive - w * i, a)) / tau1
    di = -i + logistic(w_ie * e, a)
    dw = i * (e - p) / tau2
    return de, di, dw


def equilibrium_state(p, a, w_ie, w_e):
    i_star = 1.0 / (1.0 + math.exp(-a * w_ie * p))
    w_star = (w_e * p - math.log(p / (1.0 - p)) / a) / i_star
    return p, i_star, w_star


def network_jacobian_no_delay(p, a, tau1, tau2, w_ie, w_e, lmat, h=1e-6):
    """Central-difference Jacobian of the undelayed network at equilibrium."""
    n = lmat.shape[0]
    e0, i0, w0 = equilibrium_state(p, a, w_ie, w_e)
    y0 = np.concatenate([np.full(n, e0), np.full(n, i0), np.full(n, w0)])

    def f(y):
        e, i, w = y[:n], y[n:2 * n], y[2 * n:]
        de, di, dw = node_field(e, i, w, w_e * lmat @ e, p, a, tau1, tau2, w_ie)
        return np.concatenate([de, di, dw])

    jac = np.empty((3 * n, 3 * n))
    for k in range(3 * n):
        dy = np.zeros(3 * n)
        dy[k] = h
        jac[:, k] = (f(y0 + dy) - f(y0 - dy)) / (2 * h)
    return jac


def kernel_moments_by_quadrature(density, lo, hi):
    mean = quad(lambda s: s * density(s), lo, hi, limit=200)[0]
    second = quad(lambda s: s * s * density(s), lo, hi, limit=200)[0]
    return mean, second - mean * mean


def trig_moments_by_quadrature(density, lo, hi, omega):
    s_val = quad(lambda s: math.sin(omega * s) * density(s), lo, hi, limit=400)[0]
    c_val = quad(lambda s: math.cos(omega * s) * density(s), lo, hi, limit=400)[0]
    return s_val, c_val


def omega_condition_317(coeffs, rk, s_val, c_val, omega):
    """Frequency condition written with real/imaginary parts of ``rk`` and the trig moments."""
    al, be = rk.real, rk.imag
    x = c_val * al + s_val * be
    y = c_val * be - s_val * al
    return (-x * omega**4 + (coeffs.p2 - 1.0) * y * omega**3
            + (x * (coeffs.p1a - coeffs.p2) + coeffs.p1b * coeffs.p2) * omega**2
            - (coeffs.p0 - coeffs.p1a) * y * omega + coeffs.p0 * (x - coeffs.p1b))


def hopf_w_from_trig(coeffs, rk, s_val, c_val, omega):
    al, be = rk.real, rk.imag
    num = coeffs.p2 * omega**2 - coeffs.p0
    # real part alone; p1b only enters the imaginary part
    den = coeffs.q * omega * ((al * omega + be) * c_val - (al - be * omega) * s_val)
    return num / den


def gamma_quadrature_trajectory(p, a, tau1, tau2, w_ie, w_e, lmat, m, gamma,
                                e0, i0, w0, t_end, dt, nodes=201, cutoff=10.0,
                                renormalize=True):
    """RK4 with the gamma convolution evaluated by composite Simpson on ``[0, cutoff/gamma]``.

    The history before t=0 is constant ``e0``.  Values between stored grid
    points are linearly interpolated; inside the current step the stage value
    is used as the right end of the interpolation.
    """
    n = lmat.shape[0]
    smax = cutoff / gamma
    s = np.linspace(0.0, smax, nodes)
    hq = s[1] - s[0]
    wq = np.ones(nodes)
    wq[1:-1:2] = 4.0
    wq[2:-1:2] = 2.0
    wq *= hq / 3.0
    dens = s ** (m - 1) * gamma**m * np.exp(-gamma * s) / math.factorial(m - 1)
    weights = wq * dens
    if renormalize:
        # give the truncated kernel unit mass
        weights /= weights.sum()

    steps = int(round(t_end / dt))
    hist = np.empty((steps + 1, n))
    e, i, w = (np.array(v, dtype=float) for v in (e0, i0, w0))
    hist[0] = e
    out = np.empty((steps + 1, 3 * n))
    out[0] = np.concatenate([e, i, w])

    def delayed(t, k, e_stage):
        tq = t - s
        vals = np.empty((nodes, n))
        past = tq <= 0.0
        vals[past] = e0
        stored = (~past) & (tq <= k * dt)
        u = tq[stored] / dt
        lo = np.minimum(np.floor(u).astype(int), k - 1 if k > 0 else 0)
        frac = (u - lo)[:, None]
        vals[stored] = (1 - frac) * hist[lo] + frac * hist[np.minimum(lo + 1, k)]
        fresh = (~past) & (tq > k * dt)
        if np.any(fresh):
            frac = ((tq[fresh] - k * dt) / (t - k * dt))[:, None]
            vals[fresh] = (1 - frac) * hist[k] + frac * e_stage
        return weights @ vals

    def rhs(t, k, e, i, w):
        drive = w_e * lmat @ delayed(t, k, e)
        return node_field(e, i, w, drive, p, a, tau1, tau2, w_ie)

    for k in range(steps):
        t = k * dt
        k1 = rhs(t, k, e, i, w)
        y2 = [v + 0.5 * dt * d for v, d in zip((e, i, w), k1)]
        k2 = rhs(t + 0.5 * dt, k, *y2)
        y3 = [v + 0.5 * dt * d for v, d in zip((e, i, w), k2)]
        k3 = rhs(t + 0.5 * dt, k, *y3)
        y4 = [v + dt * d for v, d in zip((e, i, w), k3)]
        k4 = rhs(t + dt, k, *y4)
        e, i, w = (v + dt / 6.0 * (d1 + 2 * d2 + 2 * d3 + d4)
                   for v, d1, d2, d3, d4 in zip((e, i, w), k1, k2, k3, k4))
        hist[k + 1] = e
        out[k + 1] = np.concatenate([e, i, w])
    return np.arange(steps + 1) * dt, out
