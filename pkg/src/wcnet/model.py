"""Wilson-Cowan node parameters, equilibrium and linearization coefficients.

Each node carries an excitatory population E, an inhibitory population I and a
homeostatically adjusted inhibitory->excitatory weight W^EI.  Nodes interact
through excitatory coupling of total strength ``w_e`` (row-sum normalized).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

# exp() overflows just above 709
_EXP_CLAMP = 700.0


def sigmoid(x, a):
    """Logistic transfer function ``1 / (1 + exp(-a x))``."""
    z = np.clip(-a * np.asarray(x, dtype=float), -_EXP_CLAMP, _EXP_CLAMP)
    out = 1.0 / (1.0 + np.exp(z))
    return float(out) if np.ndim(out) == 0 else out


def sigmoid_inverse(y, a):
    y = np.asarray(y, dtype=float)
    if np.any((y <= 0.0) | (y >= 1.0)):
        raise ValueError(f"sigmoid_inverse needs 0 < y < 1, got {y}")
    out = np.log(y / (1.0 - y)) / a
    return float(out) if np.ndim(out) == 0 else out


def sigmoid_prime(x, a):
    s = sigmoid(x, a)
    return a * s * (1.0 - s)


@dataclass(frozen=True)
class ModelParams:
    p: float = 0.2
    a: float = 5.0
    tau1: float = 1.0
    tau2: float = 5.0
    w_ie: float = 0.0
    w_e: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie in (0, 1), got {self.p}")
        for name in ("a", "tau1", "tau2"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("w_ie", "w_e"):
            if not getattr(self, name) >= 0.0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")

    def with_weights(self, w_ie: float | None = None, w_e: float | None = None) -> "ModelParams":
        changes = {}
        if w_ie is not None:
            changes["w_ie"] = float(w_ie)
        if w_e is not None:
            changes["w_e"] = float(w_e)
        return replace(self, **changes)


def preset_params(w_ie: float = 0.0, w_e: float = 0.0) -> ModelParams:
    """Reference preset p=0.2, a=5, tau1=1, tau2=5."""
    return ModelParams(p=0.2, a=5.0, tau1=1.0, tau2=5.0, w_ie=w_ie, w_e=w_e)


@dataclass(frozen=True)
class Equilibrium:
    e_star: float
    i_star: float
    w_ei_star: float

    @property
    def realistic(self) -> bool:
        """False when the plastic weight settles at a negative value."""
        return self.w_ei_star >= 0.0


def equilibrium(params: ModelParams) -> Equilibrium:
    """Synchronous equilibrium shared by every node."""
    i_star = sigmoid(params.w_ie * params.p, params.a)
    w_ei = (params.w_e * params.p - sigmoid_inverse(params.p, params.a)) / i_star
    return Equilibrium(e_star=params.p, i_star=i_star, w_ei_star=w_ei)


@dataclass(frozen=True)
class LinCoeffs:
    """Coefficients of the per-eigenvalue characteristic factor.

    The factor reads ``lam^3 + p2 lam^2 + p1 lam + p0 - r w_e q lam (lam + 1) G(lam)``
    with ``p1 = p1a + p1b * w_e * q``.  Only ``p1`` depends on ``w_e``.
    """

    k1: float
    k2: float
    p0: float
    p1: float
    p2: float
    q: float
    p1a: float
    p1b: float
    i_star: float
    w_ei_star: float

    def p1_at(self, w_e: float) -> float:
        return self.p1a + self.p1b * w_e * self.q


def lin_coeffs(params: ModelParams) -> LinCoeffs:
    eq = equilibrium(params)
    p, a, t1, t2 = params.p, params.a, params.tau1, params.tau2
    i_star = eq.i_star
    k1 = a * p * (1.0 - p)
    k2 = a * params.w_ie * i_star * (1.0 - i_star)
    p0 = i_star**2 * k1 / (t1 * t2)
    p1 = 1.0 / t1 + eq.w_ei_star * k1 * k2 / t1 + i_star**2 * k1 / (t1 * t2)
    p2 = 1.0 / t1 + 1.0
    q = k1 / t1
    # split p1 into the w_e-free part and the coefficient of w_e*q
    p1a = (1.0 + i_star**2 * k1 / t2 - sigmoid_inverse(p, a) * k1 * k2 / i_star) / t1
    p1b = p * k2 / i_star
    return LinCoeffs(k1=k1, k2=k2, p0=p0, p1=p1, p2=p2, q=q, p1a=p1a, p1b=p1b,
                     i_star=i_star, w_ei_star=eq.w_ei_star)
