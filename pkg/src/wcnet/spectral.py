"""Per-eigenvalue characteristic factors and their roots.

Linearizing the network about the synchronous equilibrium and diagonalizing
the connectivity matrix splits the characteristic equation into one factor
per connectivity eigenvalue ``r``::

    C(lam) = lam^3 + p2 lam^2 + p1 lam + p0 - r w_e q lam (lam + 1) G(lam)

For no delay and gamma kernels ``C`` becomes a polynomial once the kernel
denominator ``(lam + gamma)^m`` is cleared; its roots come from a companion
matrix.  Discrete and uniform delays make ``C`` transcendental, and roots in a
disk are isolated with the argument principle on nested rectangles, then
polished with damped Newton steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .connectivity import Connectivity
from .kernels import DelayKernel, is_polynomial
from .model import LinCoeffs, ModelParams, lin_coeffs

DEFAULT_RADIUS = 8.0
REAL_ROOT_TOL = 1e-12


class RootFindingError(RuntimeError):
    pass


@dataclass(frozen=True)
class CharFactor:
    coeffs: LinCoeffs
    w_e: float
    rk: complex
    kernel: DelayKernel

    @property
    def p1(self) -> float:
        return self.coeffs.p1_at(self.w_e)

    def __call__(self, lam):
        return eval_char(self, lam)

    def poles(self) -> list[tuple[complex, int]]:
        """Kernel poles that survive in ``C``; the coupling term ``lam (lam + 1)`` may cancel them."""
        if self.rk * self.w_e * self.coeffs.q == 0:
            return []
        out = []
        for pole, mult in self.kernel.poles():
            mult -= sum(1 for z in (0.0, -1.0) if abs(pole - z) < 1e-12)
            if mult > 0:
                out.append((pole, mult))
        return out


def char_factor(params: ModelParams, rk: complex, kernel: DelayKernel) -> CharFactor:
    return CharFactor(lin_coeffs(params), float(params.w_e), complex(rk), kernel)


def eval_char(f: CharFactor, lam):
    lam = np.asarray(lam, dtype=complex)
    c = f.coeffs
    cubic = ((lam + c.p2) * lam + f.p1) * lam + c.p0
    out = cubic - f.rk * f.w_e * c.q * lam * (lam + 1.0) * f.kernel.laplace(lam)
    return out[()] if out.ndim == 0 else out


def _deriv(func, z):
    h = 1e-6 * np.maximum(1.0, np.abs(z))
    return (func(z + h) - func(z - h)) / (2.0 * h)


def char_polynomial_parts(f: CharFactor) -> tuple[np.ndarray, np.ndarray]:
    """Cleared polynomial split as ``base + w_e * linear`` (descending coefficients).

    Only the no-delay and gamma kernels qualify; their transforms are
    ``num / den`` with ``den = (lam + gamma)^m``.
    """
    if not is_polynomial(f.kernel):
        raise NotImplementedError(f"{f.kernel.kind} kernel gives a transcendental characteristic factor")
    c = f.coeffs
    num, den = f.kernel.rational()
    base = npoly.polymul([c.p0, c.p1a, c.p2, 1.0], den).astype(complex)
    linear = npoly.polysub(c.p1b * c.q * npoly.polymul([0.0, 1.0], den),
                           f.rk * c.q * npoly.polymul([0.0, 1.0, 1.0], num)).astype(complex)
    size = max(base.size, linear.size)
    base = np.pad(base, (0, size - base.size))
    linear = np.pad(linear, (0, size - linear.size))
    return base[::-1], linear[::-1]


def char_as_polynomial(f: CharFactor) -> np.ndarray:
    """Descending coefficients of ``den(lam) * C(lam)``; degree 3 + m for gamma kernels."""
    base, linear = char_polynomial_parts(f)
    return base + f.w_e * linear


def polynomial_roots(f: CharFactor) -> np.ndarray:
    """All roots of the cleared polynomial (companion matrix eigenvalues)."""
    coeffs = char_as_polynomial(f)
    return _clean(np.roots(coeffs))


def _clean(roots):
    roots = np.asarray(roots, dtype=complex)
    return np.where(np.abs(roots.imag) < REAL_ROOT_TOL, roots.real + 0j, roots)


def batch_polynomial_roots(coeffs: np.ndarray) -> np.ndarray:
    """Roots of many monic-leading polynomials at once via stacked companion matrices.

    ``coeffs`` has shape (..., d + 1), descending, leading coefficient nonzero.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    d = coeffs.shape[-1] - 1
    lead = coeffs[..., :1]
    tail = coeffs[..., 1:] / lead
    comp = np.zeros(coeffs.shape[:-1] + (d, d), dtype=complex)
    comp[..., 0, :] = -tail
    if d > 1:
        idx = np.arange(d - 1)
        comp[..., idx + 1, idx] = 1.0
    return np.linalg.eigvals(comp)


# ---------------------------------------------------------------------------
# argument-principle root isolation


@dataclass
class _Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def size(self) -> float:
        return max(self.x1 - self.x0, self.y1 - self.y0)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        return (self.x0 - pad <= z.real <= self.x1 + pad) and (self.y0 - pad <= z.imag <= self.y1 + pad)

    def distance_from_origin(self) -> float:
        dx = max(self.x0, 0.0, -self.x1)
        dy = max(self.y0, 0.0, -self.y1)
        return math.hypot(dx, dy)

    def boundary(self, n: int) -> np.ndarray:
        t = np.arange(n) / n
        bottom = self.x0 + (self.x1 - self.x0) * t + 1j * self.y0
        right = self.x1 + 1j * (self.y0 + (self.y1 - self.y0) * t)
        top = self.x1 - (self.x1 - self.x0) * t + 1j * self.y1
        left = self.x0 + 1j * (self.y1 - (self.y1 - self.y0) * t)
        z = np.concatenate([bottom, right, top, left])
        return np.append(z, z[0])

    def split(self, frac: float) -> list["_Rect"]:
        xm = self.x0 + frac * (self.x1 - self.x0)
        ym = self.y0 + (1.0 - frac) * (self.y1 - self.y0)
        return [_Rect(self.x0, xm, self.y0, ym), _Rect(xm, self.x1, self.y0, ym),
                _Rect(self.x0, xm, ym, self.y1), _Rect(xm, self.x1, ym, self.y1)]


@dataclass
class ContourOptions:
    max_arg_step: float = 0.5      # rad between consecutive boundary samples
    min_edge_points: int = 16
    max_edge_points: int = 1 << 14
    polish_size: float = 0.25      # rectangles holding one root are polished below this size
    min_size: float = 1e-9
    max_depth: int = 60
    residual_tol: float = 1e-10
    split_frac: float = 0.5 + 0.0173  # off-center so split lines avoid symmetric points
    # fallbacks when a root sits on a split line or on the outer box
    alt_split_fracs: tuple = (0.4371, 0.5893, 0.3817, 0.6529)
    alt_pads: tuple = ((0.0113, 0.0271, 0.0137, 0.0311), (0.0419, 0.0067, 0.0233, 0.0089),
                       (0.0071, 0.0523, 0.0461, 0.0153))


def _winding(func, rect: _Rect, poles, opts: ContourOptions) -> int:
    n = opts.min_edge_points
    while True:
        z = rect.boundary(n)
        fz = func(z)
        if not np.all(np.isfinite(fz)) or np.any(fz == 0):
            raise RootFindingError("characteristic factor vanishes or blows up on a contour")
        dphi = np.angle(fz[1:] / fz[:-1])
        if np.max(np.abs(dphi)) < opts.max_arg_step:
            wind = np.sum(dphi) / (2.0 * np.pi)
            inside = sum(mult for pole, mult in poles if rect.contains(pole))
            return int(round(wind)) + inside
        n *= 2
        if n > opts.max_edge_points:
            raise RootFindingError("argument-principle contour did not resolve; root too close to the boundary")


def _polish(func, z0: complex, opts: ContourOptions, max_iter: int = 60) -> tuple[complex, float]:
    z = complex(z0)
    fz = complex(func(z))
    for _ in range(max_iter):
        tol = opts.residual_tol * max(1.0, abs(z)) ** 3
        if abs(fz) < tol:
            break
        step = fz / complex(_deriv(func, z))
        damp = 1.0
        while damp > 1e-6:
            z_new = z - damp * step
            f_new = complex(func(z_new))
            if abs(f_new) < abs(fz):
                break
            damp *= 0.5
        else:
            break
        z, fz = z_new, f_new
    return z, abs(fz)


def _split_counted(func, rect: _Rect, count: int, poles, opts: ContourOptions):
    error = None
    for frac in (opts.split_frac,) + tuple(opts.alt_split_fracs):
        children = rect.split(frac)
        try:
            counts = [_winding(func, c, poles, opts) for c in children]
        except RootFindingError as exc:
            error = exc
            continue
        if sum(counts) == count:
            return children, counts
        error = RootFindingError(f"inconsistent root counts {counts} for parent count {count}")
    raise error


def contour_roots(func, radius: float, poles=(), opts: ContourOptions | None = None) -> np.ndarray:
    """Roots of an analytic (or meromorphic, with known poles) function inside ``|z| <= radius``."""
    opts = opts or ContourOptions()
    poles = list(poles)
    for k, (a, b, c, d) in enumerate(opts.alt_pads):
        rect = _Rect(-radius - a, radius + b, -radius - c, radius + d)
        try:
            total = _winding(func, rect, poles, opts)
            break
        except RootFindingError:
            if k == len(opts.alt_pads) - 1:
                raise
    found: list[complex] = []
    stack = [(rect, total, 0)]
    while stack:
        rect, count, depth = stack.pop()
        if count <= 0 or rect.distance_from_origin() > radius:
            continue
        if count == 1 and rect.size < opts.polish_size:
            z, res = _polish(func, rect.center, opts)
            if rect.contains(z, pad=1e-9) and res < opts.residual_tol * max(1.0, abs(z)) ** 3:
                found.append(z)
                continue
        if rect.size < opts.min_size or depth >= opts.max_depth:
            found.extend([rect.center] * count)
            continue
        children, counts = _split_counted(func, rect, count, poles, opts)
        stack.extend((c, k, depth + 1) for c, k in zip(children, counts))
    roots = _clean(np.array(found, dtype=complex))
    return roots[np.abs(roots) <= radius]


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RootScan:
    max_real_part: float
    witness_root: complex | None
    disk_radius: float
    method: str
    roots: np.ndarray = field(default_factory=lambda: np.empty(0, complex), repr=False)


def roots_in_disk(f: CharFactor, radius: float = DEFAULT_RADIUS, method: str | None = None) -> tuple[np.ndarray, str]:
    if method is None:
        method = "polynomial" if is_polynomial(f.kernel) else "contour"
    if method == "polynomial":
        roots = polynomial_roots(f)
        roots = roots[np.abs(roots) <= radius]
    elif method == "contour":
        roots = contour_roots(f, radius, f.poles())
    else:
        raise ValueError(f"unknown root method {method!r}")
    return roots, method


def max_real_part(f: CharFactor, radius: float = DEFAULT_RADIUS, method: str | None = None) -> RootScan:
    """Largest real part among roots of ``f`` in the disk ``|lam| <= radius``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    roots, method = roots_in_disk(f, radius, method)
    if roots.size == 0:
        return RootScan(-math.inf, None, radius, method, roots)
    i = int(np.argmax(roots.real))
    return RootScan(float(roots[i].real), complex(roots[i]), radius, method, roots)


@dataclass(frozen=True)
class StabilityResult:
    stable: bool
    worst_eigenvalue: complex
    max_real_part: float
    witness_root: complex | None = None


def stability_test(params: ModelParams, kernel: DelayKernel, conn: Connectivity,
                   radius: float = DEFAULT_RADIUS, margin: float = 1e-9) -> StabilityResult:
    """Stability of the synchronous equilibrium over all connectivity factors."""
    coeffs = lin_coeffs(params)
    worst = None
    for rk in conn.distinct_eigenvalues():
        scan = max_real_part(CharFactor(coeffs, params.w_e, rk, kernel), radius)
        if worst is None or scan.max_real_part > worst[1].max_real_part:
            worst = (rk, scan)
    rk, scan = worst
    return StabilityResult(scan.max_real_part < -margin, rk, scan.max_real_part, scan.witness_root)


def max_real_part_grid(params: ModelParams, rk: complex, kernel: DelayKernel,
                       w_ie: np.ndarray, w_e: np.ndarray, radius: float = DEFAULT_RADIUS):
    """``max_real_part`` of one factor on the grid ``w_ie x w_e``.

    Returns ``(max_re, witness)`` with shape ``(len(w_ie), len(w_e))``.
    Polynomial kernels are handled in one batched eigenvalue call per row.
    """
    w_ie = np.asarray(w_ie, dtype=float)
    w_e = np.asarray(w_e, dtype=float)
    max_re = np.full((w_ie.size, w_e.size), -np.inf)
    witness = np.full((w_ie.size, w_e.size), np.nan + 0j)
    for i, wie in enumerate(w_ie):
        coeffs = lin_coeffs(params.with_weights(w_ie=wie, w_e=0.0))
        if is_polynomial(kernel):
            base, linear = char_polynomial_parts(CharFactor(coeffs, 0.0, rk, kernel))
            roots = batch_polynomial_roots(base[None, :] + w_e[:, None] * linear[None, :])
            inside = np.abs(roots) <= radius
            re = np.where(inside, roots.real, -np.inf)
            j = np.argmax(re, axis=1)
            max_re[i] = re[np.arange(w_e.size), j]
            witness[i] = np.where(np.isfinite(max_re[i]), roots[np.arange(w_e.size), j], np.nan)
        else:
            for j, we in enumerate(w_e):
                scan = max_real_part(CharFactor(coeffs, we, rk, kernel), radius)
                max_re[i, j] = scan.max_real_part
                if scan.witness_root is not None:
                    witness[i, j] = scan.witness_root
    return max_re, witness


def stability_grid(params: ModelParams, kernel: DelayKernel, conn: Connectivity,
                   w_ie: np.ndarray, w_e: np.ndarray, radius: float = DEFAULT_RADIUS):
    """Network-wide ``max_real_part`` on a grid plus the eigenvalue attaining it."""
    best = None
    best_rk = None
    for rk in conn.distinct_eigenvalues():
        mre, _ = max_real_part_grid(params, rk, kernel, w_ie, w_e, radius)
        if best is None:
            best = mre
            best_rk = np.full(mre.shape, rk, dtype=complex)
        else:
            better = mre > best
            best = np.where(better, mre, best)
            best_rk = np.where(better, rk, best_rk)
    return best, best_rk
