"""Numerical experiments on the weighted functional inequalities.

Everything here lives on the critical-exponent weighted spaces: the
reference measure is dmu = V^{2-m} dy with V = (D + r^2)^{-1/(1-m)} at the
critical m (so V^{2-m} = (D + r^2)^{-d/2}), and the Dirichlet form is
I[v] = int |grad v|^2 V dy.

Four experiments:

* a Gagliardo-Nirenberg bound ||v||_2^2 <= K(c0) I^{1/3} ||v||_1^{4/3}
  on the cone I/||v||_1^2 <= c0, with the empirical K tracked across c0,
* a demonstration that plain Hardy inequalities fail: spreading cutoff
  functions drain the Dirichlet energy while keeping mass, so the
  would-be Hardy ratio grows without bound,
* a log-corrected Hardy inequality with explicit constant, which does
  hold and is margin-checked on compactly supported trials,
* an empirical calibration of the log-Sobolev offset beta(eps).

Trial families are deterministic (seeded) so margins reproduce exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .profiles import DiffusionParams, make_params
from .radial_grid import (
    RadialGrid,
    build_grid,
    make_field,
    unit_sphere_area,
    weight_values,
    weighted_gradient_form,
    weighted_integral,
)
from .rate_analysis import fit_loglog

__all__ = [
    "TrialFamily",
    "GNReport",
    "GNShapeFit",
    "HardyFailureReport",
    "LogHardyReport",
    "LogSobolevReport",
    "realize_trials",
    "gn_norms",
    "gn_check",
    "gn_shape_fit",
    "hardy_failure_demo",
    "log_hardy_constant",
    "log_hardy_check",
    "log_sobolev_calibrate",
]


@dataclass(frozen=True)
class TrialFamily:
    """Deterministic family of nonnegative radial trial functions.

    kinds:
      bumps                 compact cos^2 bumps, random center/width/height
      cutoff_constants      plateaus with smooth rolloff over one octave
      profile_polynomials   even polynomials damped by a profile power
      delta_like            centered bumps with a prescribed width ladder
      spreading_plateaus    unit plateaus with a prescribed radius ladder
      geodesic_cutoffs      1 inside geodesic radius a, linear decay to 2a
    """

    kind: str
    count: int
    seed: int = 0
    spread: dict = field(default_factory=dict)

    def __post_init__(self):
        kinds = (
            "bumps",
            "cutoff_constants",
            "profile_polynomials",
            "delta_like",
            "spreading_plateaus",
            "geodesic_cutoffs",
        )
        if self.kind not in kinds:
            raise ValueError(f"unknown trial kind {self.kind!r}; expected one of {kinds}")
        if self.count < 1:
            raise ValueError("trial family must be nonempty")


def _cos2_bump(r: np.ndarray, center: float, width: float, height: float) -> np.ndarray:
    out = np.zeros_like(r)
    inside = np.abs(r - center) < width
    out[inside] = height * np.cos(0.5 * math.pi * (r[inside] - center) / width) ** 2
    return out


def _plateau(r: np.ndarray, radius: float) -> np.ndarray:
    # unit height up to `radius`, cos^2 rolloff to zero across one octave
    out = np.zeros_like(r)
    out[r <= radius] = 1.0
    band = (r > radius) & (r < 2.0 * radius)
    out[band] = np.cos(0.5 * math.pi * (r[band] - radius) / radius) ** 2
    return out


def realize_trials(family: TrialFamily, grid: RadialGrid) -> list:
    """Node-value arrays of the family's trials on a grid; all compactly
    supported kinds vanish at the boundary by construction."""
    r = grid.nodes
    rng = np.random.default_rng(family.seed)
    sp = family.spread
    trials = []
    if family.kind == "bumps":
        c_max = sp.get("center_max", 3.0)
        w_lo, w_hi = sp.get("width_range", (0.05, 2.0))
        for _ in range(family.count):
            center = rng.uniform(0.0, c_max)
            width = math.exp(rng.uniform(math.log(w_lo), math.log(w_hi)))
            height = math.exp(rng.uniform(-1.0, 1.0))
            trials.append(_cos2_bump(r, center, width, height))
    elif family.kind == "cutoff_constants":
        l_lo, l_hi = sp.get("radius_range", (0.5, grid.r_max / 8.0))
        for _ in range(family.count):
            radius = math.exp(rng.uniform(math.log(l_lo), math.log(l_hi)))
            trials.append(_plateau(r, radius))
    elif family.kind == "profile_polynomials":
        q_lo, q_hi = sp.get("power_range", (0.75 * grid.d, 1.5 * grid.d))
        for _ in range(family.count):
            q = rng.uniform(q_lo, q_hi)
            a = rng.uniform(0.2, 1.0, size=2)
            trials.append((a[0] + a[1] * r * r) * (1.0 + r * r) ** (-0.5 * q))
    elif family.kind == "delta_like":
        widths = sp.get("widths", tuple(0.02 * 2.0 ** k for k in range(family.count)))
        for width in list(widths)[: family.count]:
            trials.append(_cos2_bump(r, 0.0, float(width), 1.0))
    elif family.kind == "spreading_plateaus":
        radii = sp.get("radii", tuple(0.5 * 2.0 ** k for k in range(family.count)))
        for radius in list(radii)[: family.count]:
            trials.append(_plateau(r, float(radius)))
    else:  # geodesic_cutoffs: energy drains like 1/a, the cigar's 1d far field
        dist = np.arcsinh(r)
        radii = sp.get("geodesic_radii", tuple(1.0 + k for k in range(family.count)))
        for a in list(radii)[: family.count]:
            trials.append(np.clip((2.0 * float(a) - dist) / float(a), 0.0, 1.0))
    for t in trials:
        if not np.any(t > 0.0):
            raise ValueError("degenerate trial realized as identically zero")
    return trials


def gn_norms(grid: RadialGrid, params: DiffusionParams, D: float, values: np.ndarray) -> tuple:
    """(I, ||v||_1, ||v||_2^2) with norms in dmu and I the Dirichlet form."""
    f = make_field(grid, values)
    dirichlet = weighted_gradient_form(f, params, D)
    n1 = weighted_integral(make_field(grid, np.abs(values)), params, D, "2-m")
    n2sq = weighted_integral(make_field(grid, values * values), params, D, "2-m")
    return dirichlet, n1, n2sq


@dataclass(frozen=True)
class GNReport:
    c0: float
    n_admissible: int
    n_excluded_zero_form: int   # I = 0 trials, truncation artifacts
    K_emp: float                # max ||v||_2^2 / (I^{1/3} ||v||_1^{4/3})
    min_margin: float           # min of K_emp * RHS - LHS over admissible, >= 0
    ratios: tuple


def gn_check(
    trials,
    c0: float,
    *,
    grid: RadialGrid = None,
    params: DiffusionParams = None,
    D: float = 1.0,
    d: int = 5,
    R_max: float = 3.0e4,
    N: int = 1500,
) -> GNReport:
    """Empirical constant for the weighted Gagliardo-Nirenberg inequality.

    Admissible trials satisfy I/||v||_1^2 <= c0; trials with I = 0 (the
    truncated-domain constants) are excluded and counted, the inequality
    being vacuous only at v = 0.
    """
    if c0 <= 0.0:
        raise ValueError("the ratio ceiling c0 must be positive")
    if grid is None:
        grid = build_grid(d, R_max, N)
    if params is None:
        params = make_params(grid.d, "critical")
    if isinstance(trials, TrialFamily):
        trials = realize_trials(trials, grid)
    ratios = []
    n_zero = 0
    for values in trials:
        dirichlet, n1, n2sq = gn_norms(grid, params, D, values)
        if n1 <= 0.0:
            continue
        if dirichlet <= 0.0:
            n_zero += 1
            continue
        if dirichlet / (n1 * n1) <= c0:
            ratios.append(n2sq / (dirichlet ** (1.0 / 3.0) * n1 ** (4.0 / 3.0)))
    if not ratios:
        raise ValueError("no trials satisfy ratio constraint")
    K_emp = max(ratios)
    margins = [K_emp - rho for rho in ratios]
    return GNReport(
        c0=float(c0),
        n_admissible=len(ratios),
        n_excluded_zero_form=n_zero,
        K_emp=float(K_emp),
        min_margin=float(min(margins)),
        ratios=tuple(ratios),
    )


@dataclass(frozen=True)
class GNShapeFit:
    """Fit of K_emp(c0) to the two-term shape a c0^{2/3} + b c0^{-1/3}."""

    c0_values: tuple
    K_values: tuple
    coeff_growth: float      # a, the divergent part
    coeff_inverse: float     # b
    rms_residual: float


def gn_shape_fit(reports) -> GNShapeFit:
    """Refit the empirical constants across c0 to the predicted shape.

    The derivation optimizes a waiting time above c0^{2/3}, giving
    K(c0) = a c0^{2/3} + b c0^{-1/3}; the refit checks the growth law,
    not the constants' values.
    """
    reports = list(reports)
    if len(reports) < 2:
        raise ValueError("need at least two ratio ceilings to fit the shape")
    c0 = np.array([rep.c0 for rep in reports])
    K = np.array([rep.K_emp for rep in reports])
    design = np.column_stack([c0 ** (2.0 / 3.0), c0 ** (-1.0 / 3.0)])
    coeffs, *_ = np.linalg.lstsq(design, K, rcond=None)
    resid = design @ coeffs - K
    return GNShapeFit(
        c0_values=tuple(float(x) for x in c0),
        K_values=tuple(float(x) for x in K),
        coeff_growth=float(coeffs[0]),
        coeff_inverse=float(coeffs[1]),
        rms_residual=float(np.sqrt(np.mean(resid ** 2))),
    )


@dataclass(frozen=True)
class HardyFailureReport:
    """Spreading cutoffs defeating a fixed candidate Hardy weight."""

    n_values: tuple
    rho: tuple               # mass term over Dirichlet energy, should grow
    mass_terms: tuple        # int v_n^2 h dmu -> 1
    dirichlet: tuple         # I[v_n] -> 0 like 1/n
    dirichlet_slope: float
    strictly_increasing: bool


def hardy_failure_demo(
    n_list,
    *,
    d: int = 5,
    N: int = 1200,
    D: float = 1.0,
    grid: RadialGrid = None,
) -> HardyFailureReport:
    """Ratio int v_n^2 h dmu / I[v_n] for cutoffs spreading over octaves.

    h is the profile weight V^{2-m} normalized to unit dmu-mass, a bounded
    positive integrable candidate; v_n is 1 up to e^n and decays linearly
    in geodesic distance (arcsinh of the radius) to 0 at e^{2n}.  The
    transition annuli carry volume ~ n but gradient ~ 1/n^2 in the flat
    weight, so the Dirichlet energy drains like 1/n while the mass term
    saturates: no constant can close the inequality.
    """
    n_list = [int(n) for n in n_list]
    if not n_list or any(n <= 0 for n in n_list) or sorted(n_list) != n_list:
        raise ValueError("need a strictly increasing list of positive integers")
    needed = math.exp(2.0 * max(n_list))
    if grid is None:
        grid = build_grid(d, needed, N)
    elif grid.r_max < needed:
        raise ValueError(
            f"grid reaches {grid.r_max:.3g} but the largest cutoff needs {needed:.3g}"
        )
    params = make_params(grid.d, "critical")
    r = grid.nodes
    h = weight_values(grid, params, D, "2-m")
    h = h / weighted_integral(make_field(grid, h), params, D, "2-m")
    dist = np.arcsinh(r)
    rho, mass_terms, dirichlet = [], [], []
    for n in n_list:
        lo, hi = math.asinh(math.exp(n)), math.asinh(math.exp(2.0 * n))
        v = np.clip((hi - dist) / (hi - lo), 0.0, 1.0)
        mass = weighted_integral(make_field(grid, v * v * h), params, D, "2-m")
        energy = weighted_gradient_form(make_field(grid, v), params, D)
        mass_terms.append(mass)
        dirichlet.append(energy)
        rho.append(mass / energy)
    slope = fit_loglog(
        np.array(n_list, float),
        np.array(dirichlet),
        window=(float(n_list[0]), float(n_list[-1])),
        model="power",
    )
    increasing = bool(np.all(np.diff(rho) > 0.0))
    return HardyFailureReport(
        n_values=tuple(n_list),
        rho=tuple(rho),
        mass_terms=tuple(mass_terms),
        dirichlet=tuple(dirichlet),
        dirichlet_slope=slope.exponent_or_rate,
        strictly_increasing=increasing,
    )


def log_hardy_constant(d: int, alpha: float) -> float:
    """Explicit constant 2(d-2) / (alpha (d-2-2 alpha) min{2 alpha, d-2-2 alpha}).

    Finite for 0 < alpha < (d-2)/2; the endpoint degenerates.
    """
    if d < 3:
        raise ValueError("needs dimension at least 3")
    if not (0.0 < alpha <= 0.5 * d - 1.0):
        raise ValueError(f"alpha must lie in (0, {0.5 * d - 1.0}], got {alpha!r}")
    tail = d - 2.0 - 2.0 * alpha
    if tail <= 0.0:
        raise ValueError("degenerate constant: alpha at (d-2)/2 gives a zero denominator")
    return 2.0 * (d - 2.0) / (alpha * tail * min(2.0 * alpha, tail))


@dataclass(frozen=True)
class LogHardyReport:
    d: int
    alpha: float
    constant: float
    min_slack: float        # min over trials of (RHS - LHS)/max(RHS, LHS)
    n_trials: int
    ok: bool


def log_hardy_check(
    trials,
    d: int,
    alpha: float,
    *,
    grid: RadialGrid = None,
    R_max: float = 1.0e4,
    N: int = 1200,
    tol: float = 1.0e-10,
) -> LogHardyReport:
    """Margin-check int g^2 dmu_a <= H int |grad g|^2 dnu_a on trials.

    dmu_a = (1+r^2)^{-d/2} (1+log(1+r^2))^{a-1} dy and
    dnu_a = (1+r^2)^{1-d/2} (1+log(1+r^2))^{a+1} dy; trials should be
    compactly supported (bumps or cutoff constants).
    """
    constant = log_hardy_constant(d, alpha)
    if grid is None:
        grid = build_grid(d, R_max, N)
    if isinstance(trials, TrialFamily):
        trials = realize_trials(trials, grid)
    r = grid.nodes
    mid = grid.edge_mid
    loglayer = np.log1p(r * r)
    loglayer_mid = np.log1p(mid * mid)
    mu_w = (1.0 + r * r) ** (-0.5 * d) * (1.0 + loglayer) ** (alpha - 1.0)
    nu_w = (1.0 + mid * mid) ** (1.0 - 0.5 * d) * (1.0 + loglayer_mid) ** (alpha + 1.0)
    area = unit_sphere_area(grid.d)
    edge_coeff = area * mid ** (grid.d - 1) * nu_w / grid.dr
    slacks = []
    for values in trials:
        g = np.asarray(values, float)
        lhs = float(np.dot(grid.cell_weights, g * g * mu_w))
        rhs = constant * float(np.dot(edge_coeff, np.diff(g) ** 2))
        scale = max(lhs, rhs, 1.0e-300)
        slacks.append((rhs - lhs) / scale)
    min_slack = float(min(slacks))
    return LogHardyReport(
        d=int(d),
        alpha=float(alpha),
        constant=constant,
        min_slack=min_slack,
        n_trials=len(slacks),
        ok=min_slack >= -tol,
    )


@dataclass(frozen=True)
class LogSobolevReport:
    eps_values: tuple
    beta: tuple              # minimal offset making the inequality hold per eps
    slope_small: float       # d beta / d log eps fitted on eps < 1 (nan if < 2 pts)
    slope_large: float       # same on eps >= 1


def log_sobolev_calibrate(
    trials,
    eps_list,
    *,
    grid: RadialGrid = None,
    params: DiffusionParams = None,
    D: float = 1.0,
    d: int = 5,
    R_max: float = 3.0e4,
    N: int = 1500,
) -> LogSobolevReport:
    """Minimal beta(eps) with Ent[v] <= eps I[v] + beta ||v||_2^2 over trials.

    Ent[v] = int v^2 log(v/||v||_2) dmu.  The offset decays like
    -(d/4) log eps for small eps (probed by delta-like trials) and like
    -(1/4) log eps for large eps (probed by spreading plateaus), the two
    heat-kernel regimes in disguise.
    """
    eps_arr = np.array([float(e) for e in eps_list])
    if eps_arr.size == 0 or np.any(eps_arr <= 0.0):
        raise ValueError("need positive epsilon values")
    if grid is None:
        grid = build_grid(d, R_max, N)
    if params is None:
        params = make_params(grid.d, "critical")
    if isinstance(trials, TrialFamily):
        trials = realize_trials(trials, grid)
    rows = []
    for values in trials:
        v = np.asarray(values, float)
        if np.any(v < 0.0):
            raise ValueError("log-Sobolev trials must be nonnegative")
        n2sq = weighted_integral(make_field(grid, v * v), params, D, "2-m")
        if n2sq <= 0.0:
            continue
        n2 = math.sqrt(n2sq)
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = np.where(v > 0.0, v * v * np.log(v / n2), 0.0)
        ent = weighted_integral(make_field(grid, integrand), params, D, "2-m")
        energy = weighted_gradient_form(make_field(grid, v), params, D)
        rows.append((ent, energy, n2sq))
    if not rows:
        raise ValueError("no usable trials")
    beta = []
    for eps in eps_arr:
        beta.append(max((ent - eps * energy) / n2sq for ent, energy, n2sq in rows))
    beta_arr = np.array(beta)

    def _slope(mask: np.ndarray) -> float:
        if np.count_nonzero(mask) < 2:
            return float("nan")
        return float(np.polyfit(np.log(eps_arr[mask]), beta_arr[mask], 1)[0])

    return LogSobolevReport(
        eps_values=tuple(float(e) for e in eps_arr),
        beta=tuple(float(b) for b in beta_arr),
        slope_small=_slope(eps_arr < 1.0),
        slope_large=_slope(eps_arr >= 1.0),
    )
