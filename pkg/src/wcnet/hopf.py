"""Curves of pure imaginary eigenvalues in the ``(w_ie, w_e)`` plane.

At fixed ``w_ie`` the characteristic factor is affine in ``w_e``::

    C(lam) = A(lam) + w_e * B(lam)
    A = lam^3 + p2 lam^2 + p1a lam + p0
    B = p1b q lam - r q lam (lam + 1) G(lam)

so ``lam = i w`` is a root for real ``w_e`` exactly when ``Im(A conj(B)) = 0``
at ``i w``, and then ``w_e = -Re(A conj(B)) / |B|^2``.  For no delay and gamma
kernels the frequency condition is a real polynomial in ``w``; for discrete
and uniform delays it is bracketed on a frequency grid and bisected.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .kernels import DelayKernel, Gamma, NoDelay, is_polynomial
from .model import LinCoeffs, ModelParams, lin_coeffs, sigmoid_inverse
from .spectral import DEFAULT_RADIUS, CharFactor, eval_char, max_real_part_grid

DEFAULT_W_IE_GRID = np.linspace(0.0, 6.0, 241)
OMEGA_MAX = 20.0
OMEGA_SCAN_POINTS = 4000


def _omega_polys(coeffs: LinCoeffs, rk: complex, kernel: DelayKernel):
    """``A(i w)`` and ``B(i w)`` as complex polynomials in real ``w`` (ascending)."""
    num, den = kernel.rational()
    a_lam = npoly.polymul([coeffs.p0, coeffs.p1a, coeffs.p2, 1.0], den).astype(complex)
    b_lam = npoly.polysub(coeffs.p1b * coeffs.q * npoly.polymul([0.0, 1.0], den),
                          rk * coeffs.q * npoly.polymul([0.0, 1.0, 1.0], num)).astype(complex)
    a_w = a_lam * (1j) ** np.arange(a_lam.size)
    b_w = b_lam * (1j) ** np.arange(b_lam.size)
    return a_w, b_w


def omega_polynomial(coeffs: LinCoeffs, rk: complex, kernel: DelayKernel) -> np.ndarray:
    """Real polynomial (ascending) whose positive roots are the crossing frequencies.

    The trivial factor ``w`` is divided out; for no delay the result is a quartic.
    """
    a_w, b_w = _omega_polys(coeffs, rk, kernel)
    h = npoly.polymul(a_w, np.conj(b_w)).imag
    h = npoly.polytrim(h, tol=0.0)
    # h(0) = 0 because B(0) = 0
    return h[1:] if h.size > 1 else h


def _ab(coeffs: LinCoeffs, rk: complex, kernel: DelayKernel, omega):
    lam = 1j * np.asarray(omega, dtype=float)
    a = ((lam + coeffs.p2) * lam + coeffs.p1a) * lam + coeffs.p0
    b = coeffs.p1b * coeffs.q * lam - rk * coeffs.q * lam * (lam + 1.0) * kernel.laplace(lam)
    return a, b


def omega_function(coeffs: LinCoeffs, rk: complex, kernel: DelayKernel, omega):
    """``Im(A conj(B)) / w`` at ``lam = i w``; valid for every kernel."""
    a, b = _ab(coeffs, rk, kernel, omega)
    return (a * np.conj(b)).imag / np.asarray(omega, dtype=float)


def w_e_at_omega(coeffs: LinCoeffs, rk: complex, kernel: DelayKernel, omega):
    a, b = _ab(coeffs, rk, kernel, omega)
    return -(a * np.conj(b)).real / np.abs(b) ** 2


def hopf_omega_equation(coeffs: LinCoeffs, rk: complex, kernel: DelayKernel,
                        omega_max: float = OMEGA_MAX, n_scan: int = OMEGA_SCAN_POINTS) -> list[float]:
    """Positive frequencies at which the factor can have a root ``i w``.

    Polynomial kernels: all positive real roots (companion matrix, Newton
    polished).  Transcendental kernels: sign changes on ``(0, omega_max]``
    refined by bisection to 1e-12.
    """
    rk = complex(rk)
    if is_polynomial(kernel):
        poly = omega_polynomial(coeffs, rk, kernel)
        if poly.size < 2:
            return []
        roots = npoly.polyroots(poly)
        deriv = npoly.polyder(poly)
        out = []
        for z in roots:
            if abs(z.imag) > 1e-6 * max(1.0, abs(z)) or z.real <= 0.0:
                continue
            w = z.real
            for _ in range(3):
                dv = npoly.polyval(w, deriv)
                if dv == 0:
                    break
                w -= npoly.polyval(w, poly) / dv
            if w > 0:
                out.append(float(w))
        return sorted(out)
    grid = np.linspace(omega_max / n_scan, omega_max, n_scan)
    vals = omega_function(coeffs, rk, kernel, grid)
    out = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        lo, hi = grid[i], grid[i + 1]
        if vals[i] == 0:
            out.append(float(lo))
            continue
        if vals[i + 1] == 0:
            continue
        out.append(brentq(lambda w: omega_function(coeffs, rk, kernel, w), lo, hi, xtol=1e-12, rtol=1e-14))
    return out


def hopf_points(params: ModelParams, rk: complex, kernel: DelayKernel, w_ie: float | None = None,
                **scan) -> list[tuple[float, float]]:
    """Admissible ``(w_e, omega)`` pairs at one ``w_ie``, sorted by ``w_e``.

    Kept only when ``w_e > 0`` and the equilibrium plastic weight is non-negative.
    """
    if w_ie is not None:
        params = params.with_weights(w_ie=w_ie)
    coeffs = lin_coeffs(params.with_weights(w_e=0.0))
    finv = sigmoid_inverse(params.p, params.a)
    out = []
    for w in hopf_omega_equation(coeffs, rk, kernel, **scan):
        we = float(w_e_at_omega(coeffs, rk, kernel, w))
        if not np.isfinite(we) or we <= 0.0:
            continue
        if we * params.p - finv < 0.0:
            continue
        out.append((we, w))
    return sorted(out)


@dataclass
class HopfCurve:
    """Sampled curve ``w_e = W(w_ie)`` for one connectivity eigenvalue.

    ``samples`` rows are ``(w_ie, w_e, omega)``.  ``index`` is the rank of this
    branch among admissible crossings at each ``w_ie`` (0 = lowest).
    """

    rk: complex
    kernel: DelayKernel
    samples: np.ndarray
    method: str
    index: int = 0
    params: ModelParams | None = None
    scan: dict = field(default_factory=dict, repr=False)

    @property
    def branch(self) -> str:
        return "synchronous" if abs(self.rk - 1.0) < 1e-12 else "asynchronous"

    @property
    def w_ie(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def w_e(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def omega(self) -> np.ndarray:
        return self.samples[:, 2]

    def __len__(self) -> int:
        return len(self.samples)

    def point(self, w_ie: float) -> tuple[float, float]:
        """``(w_e, omega)`` on this branch at an arbitrary ``w_ie``; NaNs if absent."""
        if self.method != "gridBoundary" and self.params is not None:
            pts = hopf_points(self.params, self.rk, self.kernel, w_ie, **self.scan)
            if len(pts) > self.index:
                return pts[self.index]
            return (math.nan, math.nan)
        x = self.w_ie
        if len(x) == 0 or w_ie < x[0] or w_ie > x[-1]:
            return (math.nan, math.nan)
        return (float(np.interp(w_ie, x, self.w_e)), float(np.interp(w_ie, x, self.omega)))

    def at(self, w_ie: float) -> float:
        return self.point(w_ie)[0]

    def interpolant(self) -> Callable:
        return PchipInterpolator(self.w_ie, self.w_e, extrapolate=False)


def hopf_curve_closed(params: ModelParams, rk: complex, kernel: DelayKernel,
                      w_ie_grid=DEFAULT_W_IE_GRID, **scan) -> list[HopfCurve]:
    """Curves from the exact frequency condition, one per admissible branch.

    No delay and gamma kernels are solved as polynomials ("closedForm");
    discrete/uniform delays use frequency bracketing ("omegaScan").
    """
    rk = complex(rk)
    method = "closedForm" if is_polynomial(kernel) else "omegaScan"
    rows: list[list[tuple[float, float, float]]] = []
    for w_ie in np.asarray(w_ie_grid, dtype=float):
        for j, (we, w) in enumerate(hopf_points(params, rk, kernel, w_ie, **scan)):
            while len(rows) <= j:
                rows.append([])
            rows[j].append((float(w_ie), we, w))
    return [HopfCurve(rk, kernel, np.array(r, dtype=float).reshape(-1, 3), method, j, params, dict(scan))
            for j, r in enumerate(rows)]


def lowest_curve(curves: list[HopfCurve]) -> HopfCurve | None:
    """The branch lying lowest in ``w_e`` (by median); used for ordering and intersections."""
    curves = [c for c in curves if len(c)]
    if not curves:
        return None
    return min(curves, key=lambda c: float(np.median(c.w_e)))


def hopf_curve_grid(params: ModelParams, rk: complex, kernel: DelayKernel,
                    w_ie_range=(0.0, 6.0), w_e_range=(0.0, 4.0), resolution: int = 128,
                    radius: float = DEFAULT_RADIUS) -> HopfCurve:
    """Boundary where the factor's leading root crosses into the right half plane.

    The maximal real part is computed on a ``resolution x resolution`` grid;
    along each ``w_ie`` column the first negative-to-positive change in ``w_e``
    is located by linear interpolation.
    """
    if resolution < 32:
        raise ValueError("resolution must be at least 32")
    w_ie = np.linspace(*w_ie_range, resolution)
    w_e = np.linspace(*w_e_range, resolution)
    max_re, witness = max_real_part_grid(params, rk, kernel, w_ie, w_e, radius)
    rows = []
    for i in range(resolution):
        col = max_re[i]
        hits = np.nonzero((col[:-1] < 0.0) & (col[1:] >= 0.0))[0]
        if hits.size == 0:
            continue
        j = int(hits[0])
        t = col[j] / (col[j] - col[j + 1])
        we = w_e[j] + t * (w_e[j + 1] - w_e[j])
        near = j + 1 if t >= 0.5 else j
        rows.append((w_ie[i], we, abs(witness[i, near].imag)))
    return HopfCurve(complex(rk), kernel, np.array(rows, dtype=float).reshape(-1, 3), "gridBoundary",
                     0, params)


# ---------------------------------------------------------------------------
# closed forms for real connectivity eigenvalues


def no_delay_curve_real(coeffs: LinCoeffs, alpha: float) -> list[float]:
    """``w_e`` values of pure imaginary roots for no delay and real ``r = alpha``.

    Uses the quadratic in ``Omega = w^2``.
    """
    b2 = -coeffs.p1a + coeffs.p2 * (1.0 - coeffs.p1b / alpha)
    b0 = coeffs.p0 * (coeffs.p1b / alpha - 1.0)
    disc = b2 * b2 / 4.0 - b0
    if disc < 0:
        return []
    out = []
    for big_omega in (-b2 / 2.0 + math.sqrt(disc), -b2 / 2.0 - math.sqrt(disc)):
        if big_omega > 0:
            out.append((coeffs.p2 - coeffs.p0 / big_omega) / (coeffs.q * alpha))
    return out


def weak_gamma_curve_real(coeffs: LinCoeffs, alpha: float, gamma: float) -> float:
    """Explicit ``w_e`` on the Hopf curve for the exponential kernel and real ``r``."""
    a3 = gamma + coeffs.p2
    a0 = gamma * coeffs.p0
    a20 = coeffs.p1a + gamma * coeffs.p2
    a10 = coeffs.p0 + gamma * coeffs.p1a
    a21 = coeffs.q * (coeffs.p1b - gamma * alpha)
    a11 = gamma * coeffs.q * (coeffs.p1b - alpha)
    root = math.sqrt((a11 * a20 - a10 * a21) ** 2 - 4.0 * a0 * a11 * (a11 - a21 * a3))
    return (a11 * a20 * a3 - 2.0 * a10 * a11 + a10 * a21 * a3 + a3 * root) / (2.0 * a11 * (a11 - a21 * a3))


def strong_gamma_cubic_real(coeffs: LinCoeffs, alpha: float, gamma: float) -> np.ndarray:
    """Real roots of the cubic in ``w_e`` obtained by squaring the frequency condition.

    Squaring admits spurious roots, so callers must check each candidate.
    """
    c = coeffs
    # quintic coefficients b_i = b_i0 + b_i1 * w_e after clearing (lam + gamma)^2
    poly = npoly.polymul([c.p0, c.p1a, c.p2, 1.0], npoly.polypow([gamma, 1.0], 2))
    lin = npoly.polysub(c.p1b * c.q * npoly.polymul([0.0, 1.0], npoly.polypow([gamma, 1.0], 2)),
                        alpha * c.q * gamma**2 * np.array([0.0, 1.0, 1.0]))
    lin = np.pad(lin, (0, 6 - lin.size))
    b0, b4 = poly[0], poly[4]
    b10, b20, b30 = poly[1], poly[2], poly[3]
    b11, b21, b31 = lin[1], lin[2], lin[3]
    big3 = 16 * b11 * b21 * (b21 - b31 * b4)
    big2 = 16 * (b11**2 * b4**2 + (b10 * b21 - b0 * b31) * (b21 - b31 * b4)
                 - b11 * (-2 * b20 * b21 + b21 * b30 * b4 + b20 * b31 * b4))
    big1 = 16 * (b10 * (2 * b20 * b21 - b21 * b30 * b4 - b20 * b31 * b4)
                 + b0 * (2 * b30 * b31 * b4 - b21 * b30 - b20 * b31)
                 + b11 * (b20**2 - b20 * b30 * b4 - 2 * b4 * (b0 - b10 * b4)))
    big0 = 16 * (b0**2 - b0 * b20 * b30 + b0 * b4 * (b30**2 - 2 * b10)
                 + b10 * (b20**2 - b20 * b30 * b4 + b10 * b4**2))
    roots = np.roots([big3, big2, big1, big0])
    return np.sort(roots[np.abs(roots.imag) < 1e-9].real)


# ---------------------------------------------------------------------------
# ordering and intersections


@dataclass
class OrderReport:
    w_ie: np.ndarray
    difference: np.ndarray                    # async - sync on the common grid
    async_below: list[tuple[float, float]]    # w_ie intervals with async < sync
    bound_violations: dict[str, list[float]]  # curve label -> offending w_ie values

    @property
    def async_above_everywhere(self) -> bool:
        return bool(np.all(self.difference > 0))


def _common_grid(a: HopfCurve, b: HopfCurve, n: int | None = None) -> np.ndarray:
    lo = max(a.w_ie[0], b.w_ie[0])
    hi = min(a.w_ie[-1], b.w_ie[-1])
    if not hi > lo:
        raise ValueError("Hopf curves do not overlap in w_ie")
    pts = np.union1d(a.w_ie, b.w_ie)
    pts = pts[(pts >= lo) & (pts <= hi)]
    if n is not None:
        pts = np.linspace(lo, hi, n)
    return pts


def real_bounds(curve: HopfCurve, k1: float, tau1: float, tol: float = 1e-9) -> list[float]:
    """``w_ie`` samples violating ``1/(alpha K1) <= w_e < (1 + tau1)/(alpha K1)``."""
    alpha = curve.rk.real
    lo = 1.0 / (alpha * k1)
    hi = (1.0 + tau1) / (alpha * k1)
    bad = (curve.w_e < lo - tol) | (curve.w_e >= hi)
    return [float(x) for x in curve.w_ie[bad]]


def curve_order_check(sync: HopfCurve, async_: HopfCurve) -> OrderReport:
    grid = _common_grid(sync, async_)
    diff = async_.interpolant()(grid) - sync.interpolant()(grid)
    below = []
    start = None
    for x, d in zip(grid, diff):
        if d < 0 and start is None:
            start = x
        elif d >= 0 and start is not None:
            below.append((float(start), float(x)))
            start = None
    if start is not None:
        below.append((float(start), float(grid[-1])))
    violations: dict[str, list[float]] = {}
    for label, c in (("sync", sync), ("async", async_)):
        if isinstance(c.kernel, NoDelay) and abs(c.rk.imag) < 1e-12 and c.rk.real > 0 and c.params is not None:
            params = c.params
            k1 = params.a * params.p * (1.0 - params.p)
            violations[label] = real_bounds(c, k1, params.tau1)
    return OrderReport(grid, diff, below, violations)


@dataclass(frozen=True)
class DoubleHopfPoint:
    w_ie: float
    w_e: float
    omega_sync: float
    omega_async: float
    rk_sync: complex
    rk_async: complex

    def to_json(self) -> dict:
        return {"w_ie": self.w_ie, "w_e": self.w_e, "omega_sync": self.omega_sync,
                "omega_async": self.omega_async,
                "rk_sync": [self.rk_sync.real, self.rk_sync.imag],
                "rk_async": [self.rk_async.real, self.rk_async.imag]}


def find_double_hopf(sync: HopfCurve, async_: HopfCurve, tol: float = 1e-6) -> list[DoubleHopfPoint]:
    """Crossings of two Hopf curves, refined by bisection on their difference."""
    try:
        grid = _common_grid(sync, async_)
    except ValueError:
        return []
    diff = async_.interpolant()(grid) - sync.interpolant()(grid)

    def gap(x):
        return async_.at(x) - sync.at(x)

    out = []
    for i in np.nonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0)[0]:
        lo, hi = float(grid[i]), float(grid[i + 1])
        glo, ghi = gap(lo), gap(hi)
        if not (np.isfinite(glo) and np.isfinite(ghi)) or glo * ghi > 0:
            continue
        x = brentq(gap, lo, hi, xtol=1e-12)
        if abs(gap(x)) > tol:
            # a jump between branches, not a crossing
            continue
        we_s, om_s = sync.point(x)
        we_a, om_a = async_.point(x)
        out.append(DoubleHopfPoint(x, 0.5 * (we_s + we_a), om_s, om_a, sync.rk, async_.rk))
    return out


# ---------------------------------------------------------------------------
# export


def write_curves_csv(curves: list[HopfCurve], path, header: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header:
            fh.write(header.rstrip("\n") + "\n")
        fh.write("w_ie,w_e,omega,rk_re,rk_im,branch,method\n")
        for c in curves:
            for w_ie, w_e, om in c.samples:
                fh.write(f"{w_ie:.12g},{w_e:.12g},{om:.12g},{c.rk.real:.12g},{c.rk.imag:.12g},"
                         f"{c.branch},{c.method}\n")


def read_curves_csv(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def double_hopf_json(points: list[DoubleHopfPoint]) -> str:
    return json.dumps([p.to_json() for p in points], indent=2)


def residual_check(curve: HopfCurve) -> float:
    """Largest ``|C(i omega)|`` over the samples, re-evaluated through the factor."""
    if curve.params is None:
        raise ValueError("curve has no model parameters attached")
    worst = 0.0
    for w_ie, w_e, om in curve.samples:
        f = CharFactor(lin_coeffs(curve.params.with_weights(w_ie=w_ie, w_e=w_e)), w_e, curve.rk, curve.kernel)
        worst = max(worst, abs(eval_char(f, 1j * om)))
    return worst


# ---------------------------------------------------------------------------
# whole-network analysis


@dataclass
class NetworkHopf:
    sync: list[HopfCurve]
    async_curves: list[HopfCurve]
    sync_lowest: HopfCurve | None
    async_lowest: HopfCurve | None
    intersections: list[DoubleHopfPoint]
    order: OrderReport | None


def _with_conjugates(values) -> list[complex]:
    out: list[complex] = []
    for r in values:
        r = complex(r)
        for v in ((r, r.conjugate()) if abs(r.imag) > 1e-12 else (r,)):
            if not any(abs(v - u) < 1e-12 for u in out):
                out.append(v)
    return out


def analyze_network(params: ModelParams, kernel: DelayKernel, eigenvalues,
                    w_ie_grid=DEFAULT_W_IE_GRID, **scan) -> NetworkHopf:
    """Synchronous curve, asynchronous curves for ``eigenvalues`` and their crossings.

    Complex eigenvalues are paired with their conjugates; the lowest
    asynchronous branch is the one compared against the synchronous curve.
    """
    sync = hopf_curve_closed(params, 1.0, kernel, w_ie_grid, **scan)
    async_curves: list[HopfCurve] = []
    for r in _with_conjugates(v for v in eigenvalues if abs(complex(v) - 1.0) > 1e-12):
        async_curves.extend(hopf_curve_closed(params, r, kernel, w_ie_grid, **scan))
    s_low = lowest_curve(sync)
    a_low = lowest_curve(async_curves)
    points: list[DoubleHopfPoint] = []
    order = None
    if s_low is not None and a_low is not None:
        try:
            order = curve_order_check(s_low, a_low)
        except ValueError:
            order = None
        points = find_double_hopf(s_low, a_low)
    return NetworkHopf(sync, async_curves, s_low, a_low, points, order)
