"""Delay distribution kernels.

Four families are supported: no delay, a single discrete delay, a uniform
window and the gamma (Erlang) family.  Each kernel knows its mean, variance,
Laplace transform ``G(lam) = int exp(-lam s) g(s) ds`` and the trigonometric
moments ``S(w) = int sin(w s) g(s) ds`` and ``C(w) = int cos(w s) g(s) ds``,
so that ``G(i w) = C(w) - i S(w)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

# below this |u| the series for sin(u)/u and sinh(u)/u is used
_SERIES_CUTOFF = 1e-4


def sinc(u):
    """Unnormalized ``sin(u)/u`` with the removable singularity filled in."""
    u = np.asarray(u)
    small = np.abs(u) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, u)
    out = np.where(small, 1.0 - u**2 / 6.0 + u**4 / 120.0, np.sin(safe) / safe)
    return out[()] if out.ndim == 0 else out


def sinhc(u):
    """``sinh(u)/u`` for real or complex ``u``."""
    u = np.asarray(u)
    small = np.abs(u) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, u)
    out = np.where(small, 1.0 + u**2 / 6.0 + u**4 / 120.0, np.sinh(safe) / safe)
    return out[()] if out.ndim == 0 else out


class KernelPoleError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class NoDelay:
    kind = "none"

    def mean_delay(self) -> float:
        return 0.0

    def variance(self) -> float:
        return 0.0

    def support(self) -> tuple[float, float]:
        return (0.0, 0.0)

    def laplace(self, lam):
        return np.ones_like(np.asarray(lam), dtype=complex)[()]

    def trig_moments(self, omega):
        omega = np.asarray(omega, dtype=float)
        return np.zeros_like(omega)[()], np.ones_like(omega)[()]

    def rational(self):
        """Numerator and denominator of G as ascending polynomial coefficients."""
        return np.array([1.0]), np.array([1.0])

    def poles(self) -> list[tuple[complex, int]]:
        return []

    def to_spec(self) -> dict:
        return {"kind": "none"}


@dataclass(frozen=True)
class DiracShifted:
    tau_m: float
    kind = "dirac"

    def __post_init__(self):
        if not self.tau_m > 0.0:
            raise ValueError(f"dirac kernel needs tau_m > 0, got {self.tau_m} (use NoDelay)")

    def mean_delay(self) -> float:
        return self.tau_m

    def variance(self) -> float:
        return 0.0

    def support(self) -> tuple[float, float]:
        return (self.tau_m, self.tau_m)

    def laplace(self, lam):
        return np.exp(-np.asarray(lam, dtype=complex) * self.tau_m)[()]

    def trig_moments(self, omega):
        wt = np.asarray(omega, dtype=float) * self.tau_m
        return np.sin(wt)[()], np.cos(wt)[()]

    def rational(self):
        raise NotImplementedError("discrete delay has a transcendental transform")

    def poles(self) -> list[tuple[complex, int]]:
        return []

    def to_spec(self) -> dict:
        return {"kind": "dirac", "tau_m": self.tau_m}


@dataclass(frozen=True)
class Uniform:
    tau_m: float
    sigma: float
    kind = "uniform"

    def __post_init__(self):
        if not self.tau_m > 0.0:
            raise ValueError(f"uniform kernel needs tau_m > 0, got {self.tau_m}")
        if not 0.0 < self.sigma <= self.tau_m:
            raise ValueError(f"uniform kernel needs 0 < sigma <= tau_m, got sigma={self.sigma}")

    def mean_delay(self) -> float:
        return self.tau_m

    def variance(self) -> float:
        return self.sigma**2 / 3.0

    def support(self) -> tuple[float, float]:
        return (self.tau_m - self.sigma, self.tau_m + self.sigma)

    def density(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = self.support()
        return np.where((s >= lo) & (s <= hi), 0.5 / self.sigma, 0.0)[()]

    def laplace(self, lam):
        lam = np.asarray(lam, dtype=complex)
        return (np.exp(-lam * self.tau_m) * sinhc(lam * self.sigma))[()]

    def trig_moments(self, omega):
        omega = np.asarray(omega, dtype=float)
        env = sinc(omega * self.sigma)
        return (env * np.sin(omega * self.tau_m))[()], (env * np.cos(omega * self.tau_m))[()]

    def rational(self):
        raise NotImplementedError("uniform delay has a transcendental transform")

    def poles(self) -> list[tuple[complex, int]]:
        return []

    def to_spec(self) -> dict:
        return {"kind": "uniform", "tau_m": self.tau_m, "sigma": self.sigma}


@dataclass(frozen=True)
class Gamma:
    """Erlang kernel ``s^(m-1) gamma^m exp(-gamma s) / (m-1)!``.

    ``m = 1`` is the weak (exponential) kernel, ``m = 2`` the strong kernel.
    """

    m: int
    gamma: float
    kind = "gamma"

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"gamma kernel needs an integer order m >= 1, got {self.m}")
        if not self.gamma > 0.0:
            raise ValueError(f"gamma kernel needs rate gamma > 0, got {self.gamma}")

    @classmethod
    def from_mean(cls, m: int, tau_m: float) -> "Gamma":
        return cls(m=m, gamma=m / tau_m)

    def mean_delay(self) -> float:
        return self.m / self.gamma

    def variance(self) -> float:
        return self.m / self.gamma**2

    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def density(self, s):
        s = np.asarray(s, dtype=float)
        g = self.gamma
        out = np.where(s >= 0.0, s ** (self.m - 1) * g**self.m * np.exp(-g * s) / math.factorial(self.m - 1), 0.0)
        return out[()]

    def laplace(self, lam):
        lam = np.asarray(lam, dtype=complex)
        den = lam + self.gamma
        if np.any(den == 0):
            raise KernelPoleError(f"Laplace transform of gamma kernel has a pole at {-self.gamma}")
        return ((self.gamma / den) ** self.m)[()]

    def trig_moments(self, omega):
        # (gamma / (gamma + i w))^m = C - i S
        g = self.laplace(1j * np.asarray(omega, dtype=float))
        return (-np.imag(g))[()], np.real(g)[()]

    def rational(self):
        num = np.array([float(self.gamma) ** self.m])
        den = np.polynomial.polynomial.polypow([self.gamma, 1.0], self.m)
        return num, den

    def poles(self) -> list[tuple[complex, int]]:
        return [(complex(-self.gamma), self.m)]

    def to_spec(self) -> dict:
        return {"kind": "gamma", "m": self.m, "gamma": self.gamma, "tau_m": self.mean_delay()}


DelayKernel = Union[NoDelay, DiracShifted, Uniform, Gamma]


def dirac(tau_m: float) -> DelayKernel:
    """Discrete delay; a zero delay collapses to :class:`NoDelay`."""
    return NoDelay() if tau_m == 0 else DiracShifted(tau_m)


def weak_gamma(tau_m: float) -> Gamma:
    return Gamma.from_mean(1, tau_m)


def strong_gamma(tau_m: float) -> Gamma:
    return Gamma.from_mean(2, tau_m)


def is_polynomial(kernel: DelayKernel) -> bool:
    """True when clearing denominators turns the characteristic factor into a polynomial."""
    return isinstance(kernel, (NoDelay, Gamma))


def mean_delay(kernel: DelayKernel) -> float:
    return kernel.mean_delay()


def variance(kernel: DelayKernel) -> float:
    return kernel.variance()


def laplace(kernel: DelayKernel, lam):
    return kernel.laplace(lam)


def trig_moments(kernel: DelayKernel, omega):
    return kernel.trig_moments(omega)


_KNOWN_FIELDS = {"kind", "tau_m", "sigma", "m", "gamma"}


def kernel_from_spec(spec: dict) -> DelayKernel:
    """Build a kernel from a config mapping.

    ``{"kind": "none" | "dirac" | "uniform" | "gamma", "tau_m", "sigma", "m", "gamma"}``.
    Gamma kernels accept ``(m, gamma)`` or ``(m, tau_m)``; if both rate and
    mean are given they must agree.  Errors name the offending field.
    """
    if not isinstance(spec, dict):
        raise ValueError("kernel: expected a mapping")
    unknown = set(spec) - _KNOWN_FIELDS
    if unknown:
        raise ValueError(f"kernel.{sorted(unknown)[0]}: unknown field")
    kind = spec.get("kind")
    if kind not in ("none", "dirac", "uniform", "gamma"):
        raise ValueError(f"kernel.kind: expected none|dirac|uniform|gamma, got {kind!r}")

    def num(name, default=None):
        if name not in spec:
            if default is None:
                raise ValueError(f"kernel.{name}: required for kind {kind!r}")
            return default
        val = spec[name]
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ValueError(f"kernel.{name}: expected a number, got {val!r}")
        return float(val)

    try:
        if kind == "none":
            return NoDelay()
        if kind == "dirac":
            return dirac(num("tau_m"))
        if kind == "uniform":
            tau_m = num("tau_m")
            return Uniform(tau_m=tau_m, sigma=num("sigma", tau_m))
        m = num("m", 1.0)
        if m != int(m):
            raise ValueError(f"kernel.m: expected an integer, got {m}")
        m = int(m)
        if "gamma" in spec:
            k = Gamma(m=m, gamma=num("gamma"))
            if "tau_m" in spec and not math.isclose(k.mean_delay(), num("tau_m"), rel_tol=1e-9):
                raise ValueError(f"kernel.tau_m: inconsistent with m/gamma = {k.mean_delay()}")
            return k
        return Gamma.from_mean(m, num("tau_m"))
    except ValueError as exc:
        msg = str(exc)
        if not msg.startswith("kernel."):
            field = next((f for f in ("sigma", "tau_m", "gamma", "m") if f in msg), "kind")
            msg = f"kernel.{field}: {msg}"
        raise ValueError(msg) from None
