"""Entropy and Fisher functionals of radial fast-diffusion flows.

A flow snapshot carries the solution v on a radial grid together with a
matched stationary profile V: w = v/V is the pointwise ratio and
g = (w - 1) V^{m-1} is the weighted relative error, so v - V = g V^{2-m}
exactly.  Four functionals are tracked per snapshot:

* nonlinear entropy  F_nl = (1/(1-m)) int [(w-1) - (w^m-1)/m] V^m dy
* nonlinear Fisher   I_nl = int |grad Omega|^2 v dy, with the flux
  potential Omega = (v^{m-1} - V^{m-1})/(m-1) = secant_slope(w) * g
* linear entropy     F_lin = int (w-1)^2 V^m dy = int g^2 dmu, dmu = V^{2-m} dy
* linear Fisher      I_lin = int |grad g|^2 V dy

I_nl is evaluated from edge-centered differences of Omega weighted by the
harmonic edge mean of v, the same expression the implicit solver uses for
its flux, so the semi-discrete identity dF_nl/ds = -I_nl holds exactly up
to time-stepping error.

The comparison checks bound each linear quantity by its nonlinear
counterpart: a two-sided entropy equivalence, a Fisher comparison with a
quartic remainder, and an L^p bound on w - 1 by the linear entropy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .profiles import DiffusionParams
from .radial_grid import (
    RadialGrid,
    make_field,
    unit_sphere_area,
    weight_values,
    weighted_gradient_form,
    weighted_integral,
)

__all__ = [
    "FunctionalBundle",
    "EntropySandwichReport",
    "FisherComparisonReport",
    "LpEntropyReport",
    "DissipationReport",
    "FisherEvolutionReport",
    "entropy_integrand",
    "entropy_integrand_from_deviation",
    "secant_slope",
    "secant_slope_from_deviation",
    "secant_slope_derivative",
    "edge_flux",
    "edge_dissipation",
    "evaluate_bundle",
    "fisher_comparison_constants",
    "check_entropy_sandwich",
    "check_fisher_comparison",
    "check_lp_entropy_bound",
    "dissipation_residual",
    "fisher_evolution_check",
]

# Relative slack granted to inequality checks; covers quadrature rounding
# only, the inequalities themselves carry O(1) analytic headroom.
MARGIN_TOLERANCE = 1.0e-10


def entropy_integrand_from_deviation(x, m: float) -> np.ndarray:
    """Pointwise entropy density psi(1+x) = [x - ((1+x)^m - 1)/m] / (1-m).

    Convex, nonnegative, vanishing to second order at x = 0.  A quartic
    series around x = 0 avoids catastrophic cancellation for |x| < 1e-4;
    at m = 0 the power mean degenerates to x - log(1+x).

    Callers that know the deviation x = w - 1 in full precision (for flow
    snapshots x = g V^{1-m}) must pass it here rather than forming w first:
    on wide grids the ratio rounds to exactly 1 long before the deviation
    underflows, and the quadratic-order tail of the entropy is then
    unrecoverable from w alone.
    """
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= -1.0):
        raise ValueError("deviation must be finite with 1 + x > 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        if m == 0.0:
            exact = x - np.log1p(x)
        else:
            exact = (x - np.expm1(m * np.log1p(x)) / m) / (1.0 - m)
    series = 0.5 * x * x * (1.0 + (m - 2.0) * x / 3.0 + (m - 2.0) * (m - 3.0) * x * x / 12.0)
    return np.where(np.abs(x) < 1.0e-4, series, exact)


def entropy_integrand(w, m: float) -> np.ndarray:
    """Entropy density as a function of the ratio w; see the deviation form."""
    w = np.asarray(w, dtype=float)
    if np.any(~np.isfinite(w)) or np.any(w <= 0.0):
        raise ValueError("ratio field must be finite and strictly positive")
    return entropy_integrand_from_deviation(w - 1.0, m)


def secant_slope_from_deviation(x, m: float):
    """Secant slope through 1 of u -> (u^{m-1}-1)/(m-1), from x = w - 1.

    Equals Omega/g, the ratio of flux potential to weighted error; equals 1
    at x = 0 and decreases in x.  Quadratic series below |x| = 1e-8.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = np.expm1((m - 1.0) * np.log1p(x)) / ((m - 1.0) * x)
    series = 1.0 + (m - 2.0) * x / 2.0 + (m - 2.0) * (m - 3.0) * x * x / 6.0
    out = np.where(np.abs(x) < 1.0e-8, series, exact)
    if out.ndim == 0:
        return float(out)
    return out


def secant_slope(w, m: float):
    """Secant slope as a function of the ratio w; see the deviation form."""
    return secant_slope_from_deviation(np.asarray(w, dtype=float) - 1.0, m)


def secant_slope_derivative(w, m: float):
    """d/dw of secant_slope; nonpositive, equal to (m-2)/2 at w = 1.

    Away from 1 it is (w^{m-2} - secant_slope(w))/(w-1); a cubic series
    takes over below |w-1| = 1e-6 where that quotient loses digits.
    """
    w = np.asarray(w, dtype=float)
    x = w - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = (np.exp((m - 2.0) * np.log1p(x)) - secant_slope(w, m)) / x
    series = (
        (m - 2.0) / 2.0
        + (m - 2.0) * (m - 3.0) * x / 3.0
        + (m - 2.0) * (m - 3.0) * (m - 4.0) * x * x / 8.0
    )
    out = np.where(np.abs(x) < 1.0e-6, series, exact)
    if out.ndim == 0:
        return float(out)
    return out


def edge_flux(grid: RadialGrid, v_nodes: np.ndarray, omega_nodes: np.ndarray) -> np.ndarray:
    """Radial flux of the potential omega through each cell boundary.

    Per edge j between nodes j and j+1: area(mid_j) * v_edge * dOmega/dr,
    with v_edge the harmonic mean of the neighbouring node values of v.
    The implicit solver balances exactly these fluxes, so dissipation
    computed from them matches the entropy decay of the scheme.
    """
    v_nodes = np.asarray(v_nodes, dtype=float)
    omega_nodes = np.asarray(omega_nodes, dtype=float)
    if v_nodes.shape != (grid.n_nodes,) or omega_nodes.shape != (grid.n_nodes,):
        raise ValueError("node arrays must match the grid")
    if np.any(v_nodes <= 0.0):
        raise ValueError("v must be strictly positive")
    # area/dr in log space: mid^{d-1} alone can approach the float ceiling
    geom = np.exp(
        math.log(unit_sphere_area(grid.d))
        + (grid.d - 1) * np.log(grid.edge_mid)
        - np.log(grid.dr)
    )
    v_edge = 2.0 * v_nodes[:-1] * v_nodes[1:] / (v_nodes[:-1] + v_nodes[1:])
    return geom * v_edge * np.diff(omega_nodes)


def edge_dissipation(grid: RadialGrid, v_nodes: np.ndarray, omega_nodes: np.ndarray) -> float:
    """Nonlinear Fisher information int |grad Omega|^2 v dy on edges."""
    flux = edge_flux(grid, v_nodes, omega_nodes)
    return float(np.dot(flux, np.diff(np.asarray(omega_nodes, dtype=float))))


@dataclass(frozen=True)
class FunctionalBundle:
    """Functionals of one flow snapshot, the per-cadence record of a run."""

    s: float
    m: float
    F_nl: float       # nonlinear relative entropy
    I_nl: float       # nonlinear Fisher information (edge form)
    F_lin: float      # int (w-1)^2 V^m dy = squared mu-norm of g
    I_lin: float      # int |grad g|^2 V dy
    sup_w: float
    inf_w: float
    N_g: float        # sup |g|
    rel_mass: float   # int (v - V) dy, conserved along the flow
    l2_err: float     # distance to the profile in the relative-entropy
                      # norm, sqrt int (v-V)^2 V^{m-2} dy = sqrt(F_lin)
    linf_err: float   # sup |v - V|

    def __post_init__(self):
        vals = [
            self.s, self.m, self.F_nl, self.I_nl, self.F_lin, self.I_lin,
            self.sup_w, self.inf_w, self.N_g, self.rel_mass, self.l2_err,
            self.linf_err,
        ]
        if not all(math.isfinite(x) for x in vals):
            raise ValueError("functional bundle entries must be finite")
        if min(self.F_nl, self.I_nl, self.F_lin, self.I_lin) < 0.0:
            raise ValueError("entropies and Fisher informations must be nonnegative")
        if self.inf_w <= 0.0 or self.sup_w < self.inf_w:
            raise ValueError("ratio bounds must satisfy 0 < inf_w <= sup_w")


def evaluate_bundle(snap) -> FunctionalBundle:
    """Evaluate all tracked functionals on a flow snapshot.

    The snapshot must expose: s, params, bounds (with D_star), and node
    fields v, w, g on one grid.  All integrals are weighted quadratures on
    that grid; I_nl uses the edge form shared with the solver flux.
    """
    params: DiffusionParams = snap.params
    grid: RadialGrid = snap.v.grid
    D = snap.bounds.D_star
    m = params.m
    v = snap.v.values
    w = snap.w.values
    g = snap.g.values

    # deviation w - 1 in full precision: the stored ratio w rounds to 1 in
    # the far field of wide grids while the tail still carries real entropy
    x_dev = g * weight_values(grid, params, D, 1.0 - m)
    psi = entropy_integrand_from_deviation(x_dev, m)
    F_nl = weighted_integral(make_field(grid, psi), params, D, "m")
    omega = secant_slope_from_deviation(x_dev, m) * g
    I_nl = edge_dissipation(grid, v, omega)
    F_lin = weighted_integral(make_field(grid, g * g), params, D, "2-m")
    I_lin = weighted_gradient_form(snap.g, params, D)
    rel_mass = weighted_integral(snap.g, params, D, "2-m")
    err = g * weight_values(grid, params, D, "2-m")
    l2_err = math.sqrt(max(F_lin, 0.0))
    return FunctionalBundle(
        s=float(snap.s),
        m=m,
        F_nl=max(F_nl, 0.0),
        I_nl=max(I_nl, 0.0),
        F_lin=max(F_lin, 0.0),
        I_lin=max(I_lin, 0.0),
        sup_w=float(np.max(w)),
        inf_w=float(np.min(w)),
        N_g=float(np.max(np.abs(g))),
        rel_mass=rel_mass,
        l2_err=l2_err,
        linf_err=float(np.max(np.abs(err))),
    )


@dataclass(frozen=True)
class EntropySandwichReport:
    """Two-sided equivalence of nonlinear and linear entropy."""

    lower_bound: float
    upper_bound: float
    F_nl: float
    lower_margin: float   # (F_nl - lower) / scale
    upper_margin: float   # (upper - F_nl) / scale
    ok: bool


def check_entropy_sandwich(bundle: FunctionalBundle, tol: float = MARGIN_TOLERANCE) -> EntropySandwichReport:
    """Verify F_lin/(2 S1^{2-m}) <= F_nl <= F_lin/(2 S0^{2-m}).

    S0 and S1 are the snapshot's ratio range hulled with 1, where the
    entropy density is anchored; the hull is what the convexity argument
    behind the bound actually requires, and is a no-op for decaying fields
    since w -> 1 far out.
    """
    m = bundle.m
    S1 = max(bundle.sup_w, 1.0)
    S0 = min(bundle.inf_w, 1.0)
    lower = bundle.F_lin / (2.0 * S1 ** (2.0 - m))
    upper = bundle.F_lin / (2.0 * S0 ** (2.0 - m))
    scale = max(bundle.F_nl, bundle.F_lin, 1.0e-300)
    lower_margin = (bundle.F_nl - lower) / scale
    upper_margin = (upper - bundle.F_nl) / scale
    ok = lower_margin >= -tol and upper_margin >= -tol
    return EntropySandwichReport(
        lower_bound=lower,
        upper_bound=upper,
        F_nl=bundle.F_nl,
        lower_margin=lower_margin,
        upper_margin=upper_margin,
        ok=ok,
    )


def fisher_comparison_constants(
    params: DiffusionParams, sup_w: float, inf_w: float
) -> tuple:
    """Constants (k1, k2) bounding I_lin <= k1 I_nl + k2 int g^4 V^{4-3m} dy.

    Derived from grad Omega = w^{m-2} grad g + secant_slope'(w) g^2 grad V^{1-m}
    via |a+b|^2 >= |a|^2/2 - |b|^2 and |grad V^{1-m}|^2 V <= 4 V^{4-3m}:

        k1 = 2 * sup_w^{3-2m}
        k2 = 8 * k0^2 * sup_w^{4-2m},  k0 = sup |secant_slope'| on the range.

    Any valid ratio range works; passing a run's realized (sup_w, inf_w)
    gives sharper constants than the a-priori sandwich bounds.
    """
    m = params.m
    if not (0.0 < inf_w <= sup_w) or not math.isfinite(sup_w):
        raise ValueError("need finite ratio bounds with 0 < inf_w <= sup_w")
    k1 = 2.0 * sup_w ** (3.0 - 2.0 * m)
    if sup_w - inf_w < 1.0e-12:
        k0 = abs(secant_slope_derivative(0.5 * (sup_w + inf_w), m))
    else:
        ws = np.linspace(inf_w, sup_w, 8193)
        k0 = float(np.max(np.abs(secant_slope_derivative(ws, m))))
    k2 = 8.0 * k0 * k0 * sup_w ** (4.0 - 2.0 * m)
    return k1, k2


@dataclass(frozen=True)
class FisherComparisonReport:
    """Linear Fisher bounded by nonlinear Fisher plus a quartic remainder."""

    k1: float
    k2: float
    k1_apriori: float
    k2_apriori: float
    remainder: float              # int g^4 V^{4-3m} dy
    i_lin: float
    i_nl: float
    margin: float                 # (k1 I_nl + k2 R - I_lin) / scale, realized constants
    margin_apriori: float
    sigma: float                  # remainder-vs-entropy interpolation exponent
    p_index: float                # 2 + m/(1-m), the norm index tied to sigma
    remainder_entropy_ratio: float  # R / F_nl^{1+sigma}, scale-tracking diagnostic
    ok: bool


def check_fisher_comparison(
    bundle: FunctionalBundle, snap, tol: float = MARGIN_TOLERANCE
) -> FisherComparisonReport:
    """Verify I_lin <= k1 I_nl + k2 int g^4 V^{4-3m} dy on a snapshot.

    Checked twice: with constants from the snapshot's realized ratio range
    (sharp) and from the a-priori sandwich bounds (what holds uniformly in
    time).  Also reports the interpolation exponent sigma and the ratio
    R / F_nl^{1+sigma} that a finer entropy-powered bound would control.
    """
    params: DiffusionParams = snap.params
    grid: RadialGrid = snap.v.grid
    D = snap.bounds.D_star
    m = params.m
    g = snap.g.values
    remainder = weighted_integral(make_field(grid, g ** 4), params, D, "4-3m")
    k1, k2 = fisher_comparison_constants(params, bundle.sup_w, bundle.inf_w)
    k1_a, k2_a = fisher_comparison_constants(params, snap.bounds.W1, snap.bounds.W0)
    scale = max(bundle.I_lin, bundle.I_nl, 1.0e-300)
    bound = k1 * bundle.I_nl + k2 * remainder
    bound_a = k1_a * bundle.I_nl + k2_a * remainder
    margin = (bound - bundle.I_lin) / scale
    margin_a = (bound_a - bundle.I_lin) / scale
    sigma = 2.0 / (params.d + 2.0 + m / (1.0 - m))
    p_index = 2.0 + m / (1.0 - m)
    if bundle.F_nl > 0.0:
        ratio = remainder / bundle.F_nl ** (1.0 + sigma)
    else:
        ratio = 0.0
    return FisherComparisonReport(
        k1=k1,
        k2=k2,
        k1_apriori=k1_a,
        k2_apriori=k2_a,
        remainder=remainder,
        i_lin=bundle.I_lin,
        i_nl=bundle.I_nl,
        margin=margin,
        margin_apriori=margin_a,
        sigma=sigma,
        p_index=p_index,
        remainder_entropy_ratio=ratio,
        ok=margin >= -tol and margin_a >= -tol,
    )


@dataclass(frozen=True)
class LpEntropyReport:
    """Unweighted L^p control of w - 1 by the linear entropy."""

    p: float
    lhs: float        # int |w-1|^p dy
    constant: float   # closed-form prefactor from the sandwich parameters
    rhs: float        # constant * F_lin
    margin: float
    ok: bool


def check_lp_entropy_bound(snap, tol: float = MARGIN_TOLERANCE) -> LpEntropyReport:
    """Verify int |w-1|^p dy <= C(bounds, m) * F_lin with p = 2 + m/(1-m).

    The prefactor is ((D0-D1)/(1-m))^{m/(1-m)} (1 + D*/D1)^{m(2-m)/(1-m)^2},
    from the pointwise bound |w-1|^{m/(1-m)} <= C V^m that the sandwich
    supplies.  Requires 0 <= m < 1: for negative m the index p drops below
    2 and this pointwise route breaks down.
    """
    params: DiffusionParams = snap.params
    m = params.m
    if m < 0.0:
        raise ValueError("L^p entropy bound implemented for 0 <= m < 1 only")
    grid: RadialGrid = snap.v.grid
    b = snap.bounds
    p = 2.0 + m / (1.0 - m)
    g = snap.g.values
    x_dev = g * weight_values(grid, params, b.D_star, 1.0 - m)
    lhs = weighted_integral(make_field(grid, np.abs(x_dev) ** p), params, b.D_star, "lebesgue")
    constant = ((b.D0 - b.D1) / (1.0 - m)) ** (m / (1.0 - m)) * (
        1.0 + b.D_star / b.D1
    ) ** (m * (2.0 - m) / (1.0 - m) ** 2)
    F_lin = weighted_integral(make_field(grid, g * g), params, b.D_star, "2-m")
    rhs = constant * F_lin
    scale = max(lhs, rhs, 1.0e-300)
    margin = (rhs - lhs) / scale
    return LpEntropyReport(p=p, lhs=lhs, constant=constant, rhs=rhs, margin=margin, ok=margin >= -tol)


@dataclass(frozen=True)
class DissipationReport:
    """Consistency of entropy decay with the dissipation identity."""

    s: np.ndarray           # right endpoints of the cadence intervals
    residuals: np.ndarray   # |entropy drop - dissipation integral| / scale
    max_relative: float


def dissipation_residual(series) -> DissipationReport:
    """Per-cadence-interval residual of entropy drop vs dissipated amount.

    Prefers the run's own per-step accumulated dissipation integral
    (meta["dissipated"]), against which the identity holds up to the
    stepping bias alone; falls back to a trapezoid of the cadence-sampled
    dissipation, which additionally needs the cadence to resolve the decay
    (hence the 0.1 ceiling).
    """
    s = series.s
    if s.size < 3:
        raise ValueError("need at least three cadence points")
    if float(np.max(np.diff(s))) > 0.1 + 1.0e-9:
        raise ValueError("cadence too coarse for the dissipation check (need ds <= 0.1)")
    F = series.column("F_nl")
    drop = F[:-1] - F[1:]
    diss = series.meta.get("dissipated") if hasattr(series, "meta") else None
    if diss is not None:
        diss = np.asarray(diss, dtype=float)
        if diss.shape != s.shape:
            raise ValueError("accumulated dissipation does not align with the cadence grid")
        integral = np.diff(diss)
    else:
        I = series.column("I_nl")
        integral = 0.5 * (I[1:] + I[:-1]) * np.diff(s)
    floor = 1.0e-15 * float(np.max(F, initial=0.0)) + 1.0e-300
    res = np.abs(drop - integral) / np.maximum(np.maximum(drop, integral), floor)
    return DissipationReport(
        s=s[1:],
        residuals=res,
        max_relative=float(np.max(res)) if res.size else 0.0,
    )


@dataclass(frozen=True)
class FisherEvolutionReport:
    """Boundedness and decay diagnostics of the nonlinear Fisher information."""

    peak: float
    tail_max: float
    tail_fraction: float     # tail_max / peak
    kappa1: float            # fitted in dI/ds ~= kappa1 I - kappa2 I^2
    kappa2: float
    envelope_ok: bool        # I stays below the fitted comparison solution
    bounded: bool
    decays: bool


def fisher_evolution_check(series, tail_threshold: float = 0.10) -> FisherEvolutionReport:
    """Check that I_nl stays bounded and decays, with a comparison envelope.

    Fits dI/ds = kappa1 I - kappa2 I^2 by least squares, then verifies the
    run stays below the closed-form solution of that comparison equation
    started 5 percent above the first sample.  Intended for runs started
    above the stationary profile, where that differential bound is the
    mechanism forcing I -> 0.
    """
    s = series.s
    I = series.column("I_nl")
    if s.size < 4:
        raise ValueError("need at least four cadence points")
    bounded = bool(np.all(np.isfinite(I)))
    peak = float(np.max(I))
    half = s[0] + 0.5 * (s[-1] - s[0])
    tail_max = float(np.max(I[s >= half]))
    if peak < 1.0e-28:
        return FisherEvolutionReport(
            peak=peak, tail_max=tail_max, tail_fraction=0.0,
            kappa1=0.0, kappa2=0.0, envelope_ok=True, bounded=bounded, decays=True,
        )
    dI = np.gradient(I, s)
    design = np.column_stack([I, -I * I])
    coeffs, *_ = np.linalg.lstsq(design, dI, rcond=None)
    kappa1, kappa2 = float(coeffs[0]), float(coeffs[1])
    k1e = max(kappa1, 1.0e-8)
    k2e = max(kappa2, 0.0)
    zeta0 = 1.05 * I[0] + 1.0e-300
    # logistic comparison solution of Z' = k1e Z - k2e Z^2, Z(s0) = zeta0
    expo = np.exp(-np.minimum(k1e * (s - s[0]), 700.0))
    denom = k2e + (k1e / zeta0 - k2e) * expo
    with np.errstate(over="ignore"):
        Z = np.where(denom > 0.0, k1e / np.maximum(denom, 1.0e-300), np.inf)
    envelope_ok = bool(np.all(I <= Z * (1.0 + 1.0e-6) + 1.0e-30))
    return FisherEvolutionReport(
        peak=peak,
        tail_max=tail_max,
        tail_fraction=tail_max / peak,
        kappa1=kappa1,
        kappa2=kappa2,
        envelope_ok=envelope_ok,
        bounded=bounded,
        decays=tail_max < tail_threshold * peak,
    )
