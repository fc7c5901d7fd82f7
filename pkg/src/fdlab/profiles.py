"""Stationary profiles, critical exponents, and self-similar rescaling maps.

Everything in this module is closed form.  The one numerically delicate
point is criticality detection: several downstream algorithms branch on
whether the diffusion exponent sits exactly at the value where the
linearized generator loses its spectral gap, so derived constants are
computed with rational arithmetic and the branch decision never compares
floats against floats computed elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

__all__ = [
    "DiffusionParams",
    "BarenblattProfile",
    "SandwichBounds",
    "RescaleMaps",
    "critical_exponent",
    "extinction_exponent",
    "make_params",
    "make_profile",
    "eval_profile",
    "log_profile_power",
    "profile_power",
    "make_sandwich",
    "recenter_sandwich",
    "rescale_maps",
]

ExponentLike = Union[int, float, Fraction, str]


def critical_exponent(d: int) -> Fraction:
    """Exponent at which the linearized flow loses its spectral gap."""
    return Fraction(d - 4, d - 2)


def extinction_exponent(d: int) -> Fraction:
    """Exponent below which solutions vanish in finite time."""
    return Fraction(d - 2, d)


@dataclass(frozen=True)
class DiffusionParams:
    """Dimension, diffusion exponent, and every derived rescaling constant.

    All derived fields are computed once, exactly (rational arithmetic),
    at construction; downstream formulas must reference these rather than
    re-deriving them.
    """

    d: int
    m: float
    m_exact: Fraction       # exact value backing `m`; authoritative for branching
    m_c: float              # extinction threshold (d-2)/d
    m_star: float           # gap-loss exponent (d-4)/(d-2)
    beta: float             # space rescaling exponent 1/(d(1-m)-2)
    a: float                # space rescaling constant, a^2 = gamma
    gamma: float            # time rescaling constant (1-m)*beta/2
    q_m: float              # integrability index d(1-m)/(2(2-m)); == 1 exactly at criticality
    is_critical: bool

    @property
    def kappa(self) -> float:
        """Profile decay exponent 1/(1-m)."""
        return 1.0 / (1.0 - self.m)


def make_params(d: int, m: ExponentLike = "critical") -> DiffusionParams:
    """Validate (d, m) and populate every derived constant.

    ``m`` may be the string ``"critical"``, a Fraction, or a float.  A float
    that equals the nearest-double of the critical fraction is snapped to the
    exact rational so that criticality detection is deterministic.
    """
    if not isinstance(d, (int, np.integer)) or d < 3:
        raise ValueError(f"dimension must be an integer >= 3, got {d!r}")
    d = int(d)

    m_star_frac = critical_exponent(d)
    if isinstance(m, str):
        if m != "critical":
            raise ValueError(f"unrecognized exponent spec {m!r}")
        m_frac = m_star_frac
    elif isinstance(m, Fraction):
        m_frac = m
    else:
        m_float = float(m)
        # snap floats that are the closest double to the critical rational
        if m_float == float(m_star_frac):
            m_frac = m_star_frac
        else:
            m_frac = Fraction(m_float)

    m_c_frac = extinction_exponent(d)
    if m_frac >= m_c_frac:
        raise ValueError(
            f"m={float(m_frac):g} not in extinction regime: need m < (d-2)/d = {float(m_c_frac):g}"
        )

    one = Fraction(1)
    beta_frac = 1 / (d * (one - m_frac) - 2)    # > 0 iff m < m_c
    gamma_frac = (one - m_frac) * beta_frac / 2
    q_frac = d * (one - m_frac) / (2 * (2 - m_frac))

    return DiffusionParams(
        d=d,
        m=float(m_frac),
        m_exact=m_frac,
        m_c=float(m_c_frac),
        m_star=float(m_star_frac),
        beta=float(beta_frac),
        a=math.sqrt(float(gamma_frac)),
        gamma=float(gamma_frac),
        q_m=float(q_frac),
        is_critical=(m_frac == m_star_frac),
    )


@dataclass(frozen=True)
class BarenblattProfile:
    """Radially decreasing stationary state (D + r^2)^(-1/(1-m))."""

    D: float
    params: DiffusionParams


def make_profile(params: DiffusionParams, D: float = 1.0) -> BarenblattProfile:
    if not (D > 0 and math.isfinite(D)):
        raise ValueError(f"profile parameter must be positive and finite, got {D!r}")
    return BarenblattProfile(D=float(D), params=params)


def _log_base(D: float, r: np.ndarray) -> np.ndarray:
    """log(D + r^2), overflow-safe for r up to the largest double."""
    r = np.asarray(r, dtype=float)
    big = r > 1.0
    rb = np.where(big, r, 1.0)
    out = np.where(
        big,
        2.0 * np.log(rb) + np.log1p((D / rb) / rb),
        np.log(D + np.where(big, 0.0, r) ** 2),
    )
    return out


def log_profile_power(p: BarenblattProfile, r, power: float = 1.0) -> np.ndarray:
    """log of V_D(r)**power, computed in log space.

    Individual factors like r^(d-1) and V^(2-m) can over/underflow long
    before their product does, so quadrature weights are assembled from
    logs whenever powers of the profile are involved.
    """
    kappa = p.params.kappa
    return -power * kappa * _log_base(p.D, r)


def profile_power(p: BarenblattProfile, r, power: float = 1.0) -> np.ndarray:
    """V_D(r)**power evaluated overflow-safely."""
    return np.exp(log_profile_power(p, r, power))


def eval_profile(p: BarenblattProfile, r) -> np.ndarray:
    """Profile value (D + r^2)^(-1/(1-m)) at radius r (scalar or array)."""
    return profile_power(p, r, 1.0)


@dataclass(frozen=True)
class SandwichBounds:
    """Ordered profile parameters D0 > D_star > D1 and the induced ratio bounds.

    W0 = (D_star/D0)^(1/(1-m)) < 1 and W1 = (D_star/D1)^(1/(1-m)) > 1 bound
    the ratio v/V_{D_star} for any v squeezed between the outer profiles.
    """

    D0: float
    D_star: float
    D1: float
    W0: float
    W1: float


def make_sandwich(params: DiffusionParams, D0: float, D_star: float, D1: float) -> SandwichBounds:
    if not (D0 > D_star > D1 > 0):
        raise ValueError(f"need D0 > D_star > D1 > 0, got {(D0, D_star, D1)}")
    kappa = params.kappa
    return SandwichBounds(
        D0=float(D0),
        D_star=float(D_star),
        D1=float(D1),
        W0=(D_star / D0) ** kappa,
        W1=(D_star / D1) ** kappa,
    )


def recenter_sandwich(params: DiffusionParams, b: SandwichBounds, D_star: float) -> SandwichBounds:
    """Same outer profiles, re-centered reference (used by mass balancing)."""
    return make_sandwich(params, b.D0, D_star, b.D1)


@dataclass(frozen=True)
class RescaleMaps:
    """Exact two-sided change of variables between original and self-similar frames.

    Forward: (t, x, u) -> (s, y, v) with
        s = gamma * log(T / (T - t)),
        y = a * x * (T - t)**beta,
        v = (T - t)**(-d*beta) * u.
    The inverse composes to the identity up to roundoff.
    """

    params: DiffusionParams
    T: float

    def to_selfsim(self, t, x=None, u=None):
        p = self.params
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t >= self.T):
            raise ValueError("forward map needs 0 <= t < T")
        tau = self.T - t
        s = p.gamma * np.log(self.T / tau)
        out = [s]
        if x is not None:
            out.append(p.a * np.asarray(x, dtype=float) * tau ** p.beta)
        if u is not None:
            out.append(np.asarray(u, dtype=float) * tau ** (-p.d * p.beta))
        return tuple(out) if len(out) > 1 else out[0]

    def to_original(self, s, y=None, v=None):
        p = self.params
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("inverse map needs s >= 0")
        tau = self.T * np.exp(-s / p.gamma)
        t = self.T - tau
        out = [t]
        if y is not None:
            out.append(np.asarray(y, dtype=float) / (p.a * tau ** p.beta))
        if v is not None:
            out.append(np.asarray(v, dtype=float) * tau ** (p.d * p.beta))
        return tuple(out) if len(out) > 1 else out[0]


def rescale_maps(params: DiffusionParams, T: float) -> RescaleMaps:
    if not (T > 0 and math.isfinite(T)):
        raise ValueError(f"extinction time must be positive and finite, got {T!r}")
    return RescaleMaps(params=params, T=float(T))
