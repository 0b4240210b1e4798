"""Admissibility conditions for weight pairs.

Every sufficient condition in the theory reduces to one of three shapes:

* a *two-factor supremum*: ``sup_r (int_0^r f0)^{1/q0} (int_r^inf f1)^{1/q1}``
  over positive integrands built from the weights (a Muckenhoupt-type
  quantity);
* a *one-sided integral pair* split at ``r = 1`` (the inclusion criteria);
* an *inequality on logarithmic derivatives* or on plain exponent
  arithmetic.

The supremum over ``(0, inf)`` cannot be checked exhaustively; it is probed
on a geometric grid and combined with power-law tail classification of
both integrands and of the product itself.  Verdict vocabulary:

* ``holds``    -- finite on the probe range with benign end behaviour;
* ``fails``    -- a tail integral or the product provably diverges
  (fitted exponent strictly beyond the critical value);
* ``marginal`` -- within the marginal band of a critical exponent, which
  includes sitting exactly on an interval endpoint.  Marginal is never
  silently promoted to ``holds``.

Verdicts mean "sufficient condition verified on the probe range"; a
``fails`` verdict never proves the mapping property is false.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .core import (
    CONVERGENT, DIVERGENT, INFINITY, MARGINAL, ZERO,
    ModelConstants, RadialGrid, TailClass,
    adaptive_integral, integrate_log_space, segment_integral,
    supremum_scan, tail_classify,
)
from .errors import ConfigError, DivergentB, HypothesisFails, PreconditionViolated
from .geometry import LipschitzGraph
from .weights import RadialWeight

HOLDS = "holds"
FAILS = "fails"

FROM_ZERO = "from_zero"
FROM_INFINITY = "from_infinity"

# Ordered identifiers of the full battery.
CONDITION_IDS = (
    "equivalent_norm",
    "existence_plain",
    "existence_dini",
    "uniqueness_origin",
    "uniqueness_tail",
    "inclusion_lebesgue",
    "inclusion_sobolev",
    "continuity_first",
    "continuity_second",
    "inverse_first",
    "inverse_second",
    "isomorphism_logderiv",
    "power_interval",
)


@dataclass(frozen=True)
class ScanSettings:
    """Probe grid and honesty bands shared by all condition evaluations."""

    grid: RadialGrid = field(default_factory=lambda: RadialGrid(1e-6, 1e6, 32))
    marginal_band: float = 0.05
    exact_tol: float = 1e-6
    quad_tol: float = 1e-10
    dini_slack_decades: float = 2.0

    def classify(self, f, end):
        ref = math.sqrt(self.grid.r_min * self.grid.r_max)
        return tail_classify(f, end, ref=ref, marginal_band=self.marginal_band,
                             exact_tol=self.exact_tol)


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one admissibility check."""

    condition_id: str
    verdict: str
    sup_estimate: float | None
    argmax_r: float | None
    boundary_flag: bool
    divergent: bool
    trace: tuple[tuple[float, float], ...]
    constants_used: dict
    notes: tuple[str, ...] = ()

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def to_dict(self) -> dict:
        return {
            "condition_id": self.condition_id,
            "verdict": self.verdict,
            "sup_estimate": self.sup_estimate,
            "argmax_r": self.argmax_r,
            "boundary_flag": self.boundary_flag,
            "divergent": self.divergent,
            "trace": [[r, v] for r, v in self.trace],
            "constants_used": self.constants_used,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class HardyReport:
    """Two-factor supremum and empirical least constant of a Hardy pair."""

    B: float
    C_lower: float
    C_upper: float
    C_empirical: float
    direction: str
    p: float
    best_trial: dict = field(default_factory=dict)

    @property
    def sandwich_holds(self) -> bool:
        tol = 1e-6 * max(1.0, self.C_upper)
        return self.C_lower - tol <= self.C_empirical <= self.C_upper + tol

    def to_dict(self) -> dict:
        return {
            "B": self.B, "C_lower": self.C_lower, "C_upper": self.C_upper,
            "C_empirical": self.C_empirical, "direction": self.direction,
            "p": self.p, "best_trial": self.best_trial,
            "sandwich_holds": self.sandwich_holds,
        }


@dataclass(frozen=True)
class PiLemmaReport:
    """Pointwise verification of the integration-by-parts bound."""

    side: str
    alpha: float
    beta: float
    C: float
    applicable: bool
    max_ratio: float
    equality_gap: float
    argmax_r: float

    def to_dict(self) -> dict:
        return {
            "side": self.side, "alpha": self.alpha, "beta": self.beta,
            "C": self.C, "applicable": self.applicable,
            "max_ratio": self.max_ratio, "equality_gap": self.equality_gap,
            "argmax_r": self.argmax_r,
        }


# --- cumulative scan machinery -------------------------------------------------

def _is_zero_function(f, nodes) -> bool:
    probe = nodes[:: max(1, len(nodes) // 16)]
    vals = np.asarray([float(f(r)) for r in probe])
    return bool(np.all(vals == 0.0))


def _cumulative_from_zero(f, nodes, tail: TailClass) -> np.ndarray:
    """``I[k] = integral_0^{nodes[k]} f`` with power-law head extrapolation."""
    e = tail.fitted_exponent
    head = 0.0
    if math.isfinite(e):
        head = float(f(nodes[0])) * nodes[0] / (e + 1.0)
    segs = [segment_integral(f, a, b) for a, b in zip(nodes[:-1], nodes[1:])]
    return head + np.concatenate([[0.0], np.cumsum(segs)])


def _cumulative_to_infinity(f, nodes, tail: TailClass) -> np.ndarray:
    """``I[k] = integral_{nodes[k]}^inf f`` with power-law tail extrapolation."""
    e = tail.fitted_exponent
    tail_val = 0.0
    if math.isfinite(e):
        tail_val = float(f(nodes[-1])) * nodes[-1] / (-1.0 - e)
    segs = [segment_integral(f, a, b) for a, b in zip(nodes[:-1], nodes[1:])]
    rev = np.concatenate([[0.0], np.cumsum(segs[::-1])])[::-1]
    return tail_val + rev


def _end_slope(nodes, values, end: str, ppd: int) -> float:
    """Fitted log-log slope of a positive array near one grid end."""
    k = ppd + 1
    if end == INFINITY:
        r, v = nodes[-k:], values[-k:]
    else:
        r, v = nodes[:k], values[:k]
    good = np.isfinite(v) & (v > 0)
    if good.sum() < 3:
        return math.nan
    t, w = np.log(r[good]), np.log(v[good])
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, w, rcond=None)
    return float(coef[0])


def _tail_verdict(tail: TailClass, settings: ScanSettings) -> str:
    """Map a divergent/marginal tail to the condition vocabulary.

    A fitted exponent sitting exactly on the critical value is an interval
    endpoint: reported marginal, not fails, so boundary cases aggregate to
    the honest "on the boundary" verdict.
    """
    if tail.convergent:
        return HOLDS
    dist = abs(tail.fitted_exponent - (-1.0))
    if tail.divergent and dist > settings.exact_tol:
        return FAILS
    return MARGINAL


def _growth_verdict(slope: float, end: str, settings: ScanSettings) -> str:
    """Verdict contribution of the product's end behaviour.

    Bounded requires slope <= 0 at infinity and >= 0 at zero; decay is
    benign at any rate, growth beyond the band is failure, growth inside
    the band (log-type corrections) is marginal.
    """
    if math.isnan(slope):
        return HOLDS
    growth = slope if end == INFINITY else -slope
    if growth > settings.marginal_band:
        return FAILS
    if growth > settings.exact_tol:
        return MARGINAL
    return HOLDS


def _combine(*verdicts: str) -> str:
    if FAILS in verdicts:
        return FAILS
    if MARGINAL in verdicts:
        return MARGINAL
    return HOLDS


def _product_condition(
    condition_id: str,
    integrand_zero: Callable, q_zero: float,
    integrand_inf: Callable, q_inf: float,
    mc: ModelConstants,
    settings: ScanSettings,
    notes: tuple[str, ...] = (),
) -> ConditionReport:
    """Evaluate ``sup_r (int_0^r f0)^{1/q0} (int_r^inf f1)^{1/q1}``."""
    nodes = settings.grid.nodes
    ppd = settings.grid.points_per_decade
    snapshot = mc.snapshot()

    if _is_zero_function(integrand_zero, nodes) or _is_zero_function(integrand_inf, nodes):
        return ConditionReport(condition_id, HOLDS, 0.0, float(nodes[0]), True,
                               False, ((float(nodes[0]), 0.0),), snapshot,
                               notes + ("one factor vanishes identically",))

    t0 = settings.classify(integrand_zero, ZERO)
    t1 = settings.classify(integrand_inf, INFINITY)
    v0, v1 = _tail_verdict(t0, settings), _tail_verdict(t1, settings)
    tail_verdict = _combine(v0, v1)
    if tail_verdict != HOLDS:
        which = []
        if v0 != HOLDS:
            which.append(f"zero-end integrand exponent {t0.fitted_exponent:.4g}")
        if v1 != HOLDS:
            which.append(f"infinity-end integrand exponent {t1.fitted_exponent:.4g}")
        return ConditionReport(condition_id, tail_verdict, None, None, True, True,
                               (), snapshot, notes + tuple(which))

    I0 = _cumulative_from_zero(integrand_zero, nodes, t0)
    I1 = _cumulative_to_infinity(integrand_inf, nodes, t1)
    with np.errstate(over="ignore"):
        product = I0 ** (1.0 / q_zero) * I1 ** (1.0 / q_inf)
    if not np.all(np.isfinite(product)):
        return ConditionReport(condition_id, FAILS, None, None, True, True, (),
                               snapshot, notes + ("product overflow on probe grid",))

    k = int(np.argmax(product))
    sup_val = float(product[k])
    boundary = k in (0, len(nodes) - 1)
    s_zero = _end_slope(nodes, product, ZERO, ppd)
    s_inf = _end_slope(nodes, product, INFINITY, ppd)
    verdict = _combine(_growth_verdict(s_zero, ZERO, settings),
                       _growth_verdict(s_inf, INFINITY, settings))
    extra = ()
    if verdict != HOLDS:
        extra = (f"product end slopes: zero {s_zero:.4g}, infinity {s_inf:.4g}",)
    trace = tuple(zip(nodes.tolist(), product.tolist()))
    return ConditionReport(condition_id, verdict, sup_val, float(nodes[k]),
                           boundary, verdict == FAILS, trace, snapshot,
                           notes + extra)


def _one_sided_integral(f, end: str, settings: ScanSettings) -> tuple[str, float | None, TailClass]:
    """``int_0^1 f`` or ``int_1^inf f`` with tail classification first."""
    tail = settings.classify(f, end)
    verdict = _tail_verdict(tail, settings)
    if verdict != HOLDS:
        return verdict, None, tail
    grid = settings.grid
    if end == ZERO:
        nodes = np.geomspace(grid.r_min, 1.0, max(8, int(8 * math.log10(1.0 / grid.r_min))))
        head = 0.0
        if math.isfinite(tail.fitted_exponent):
            head = float(f(nodes[0])) * nodes[0] / (tail.fitted_exponent + 1.0)
        value = head + sum(segment_integral(f, a, b) for a, b in zip(nodes[:-1], nodes[1:]))
    else:
        nodes = np.geomspace(1.0, grid.r_max, max(8, int(8 * math.log10(grid.r_max))))
        tail_val = 0.0
        if math.isfinite(tail.fitted_exponent):
            tail_val = float(f(nodes[-1])) * nodes[-1] / (-1.0 - tail.fitted_exponent)
        value = tail_val + sum(segment_integral(f, a, b) for a, b in zip(nodes[:-1], nodes[1:]))
    return verdict, float(value), tail


def _slope_condition(condition_id, ratio_func, end, bound_kind, mc, settings,
                     notes=()) -> ConditionReport:
    """Big-O check by end-slope comparison.

    ``ratio_func`` is the quantity required to stay bounded toward ``end``:
    its fitted slope must be >= 0 at zero / <= 0 at infinity (``bound_kind``
    is only used in the note text).
    """
    nodes = settings.grid.nodes
    vals = np.asarray([float(ratio_func(r)) for r in nodes])
    slope = _end_slope(nodes, vals, end, settings.grid.points_per_decade)
    verdict = _growth_verdict(slope, end, settings)
    k = int(np.argmax(vals))
    trace = tuple(zip(nodes.tolist(), vals.tolist()))
    note = (f"{bound_kind}: fitted end slope {slope:.6g}",)
    return ConditionReport(condition_id, verdict, float(vals[k]), float(nodes[k]),
                           k in (0, len(nodes) - 1), verdict == FAILS, trace,
                           mc.snapshot(), notes + note)


# --- Dini bookkeeping -----------------------------------------------------------

class DiniAccumulator:
    """Cumulative ``integral_0^s Lambda(nu) dnu/nu`` with honest truncation.

    The profile below ``r_min`` is not resolvable; the integral is
    truncated there and the unobserved contribution is bracketed by
    ``Lambda(r_min) * slack_decades * ln 10`` (the profile would have to
    hold its value for that many further decades to add more).  ``lo``
    returns the truncated value, ``hi`` adds the bracket; divergence
    verdicts always use the pessimistic end for the factor in question.
    """

    def __init__(self, surf: LipschitzGraph, r_min: float, r_max: float,
                 slack_decades: float = 2.0, points_per_decade: int = 8):
        self.surf = surf
        self.r_min = r_min
        if surf.family == "flat":
            self._flat = True
            self.slack = 0.0
            return
        self._flat = False
        n = max(4, int(points_per_decade * math.log10(r_max / r_min)) + 1)
        self._r = np.geomspace(r_min, r_max, n)
        lam = np.asarray([surf.local_lipschitz(t) for t in self._r])
        dt = np.diff(np.log(self._r))
        self._cum = np.concatenate([[0.0], np.cumsum(0.5 * (lam[1:] + lam[:-1]) * dt)])
        self._lam_top = float(lam[-1])
        self.slack = float(lam[0]) * slack_decades * math.log(10.0)

    def lo(self, s):
        """Truncated cumulative integral, linear in log s beyond the table."""
        if self._flat:
            return np.zeros_like(np.asarray(s, dtype=float))
        sv = np.asarray(s, dtype=float)
        ls = np.log(np.maximum(sv, self.r_min))
        out = np.interp(ls, np.log(self._r), self._cum)
        over = ls > np.log(self._r[-1])
        if np.any(over):
            out = np.where(over, self._cum[-1] + self._lam_top * (ls - np.log(self._r[-1])), out)
        return out

    def hi(self, s):
        return self.lo(s) + self.slack

    def between(self, a, b):
        """``integral_a^b Lambda dnu/nu`` for a, b >= r_min (signed)."""
        return self.lo(b) - self.lo(a)


# --- the named conditions --------------------------------------------------------

def check_equivalent_norm(Gamma: RadialWeight, mc: ModelConstants,
                          settings: ScanSettings | None = None) -> ConditionReport:
    """Two-factor supremum controlling the gradient-only equivalent norm."""
    settings = settings or ScanSettings()
    N, p, pc = mc.N, mc.p, mc.p_conj
    f0 = lambda s: s ** (N - 1.0 - p) * Gamma.eval(s) ** p
    f1 = lambda s: s ** (-(N - 1.0) / (p - 1.0)) * Gamma.eval(s) ** (-pc)
    return _product_condition("equivalent_norm", f0, p, f1, pc, mc, settings)


def _existence_pair(gamma, Gamma, surf, mc, settings, ids):
    N, p, pc, M = mc.N, mc.p, mc.p_conj, mc.M
    c1 = mc.c1
    dini = DiniAccumulator(surf, settings.grid.r_min, settings.grid.r_max,
                           settings.dini_slack_decades)

    j1_f0 = lambda s: s ** (pc * (M - N / p) - 1.0) * Gamma.eval(s) ** (-pc)
    j1_f1 = lambda s: s ** (N - 1.0 - M * p) * gamma.eval(s) ** p
    rep1 = _product_condition(ids[0], j1_f0, pc, j1_f1, p, mc, settings)

    # Pessimistic bracket: the truncated Dini value shrinks the first factor
    # and its upper bracket inflates the second; a constant offset cancels in
    # the product, so only the sup estimate (not the verdict) feels it.
    j2_f0 = lambda s: s ** (N - 1.0) * gamma.eval(s) ** p * np.exp(-c1 * p * dini.lo(s))
    j2_f1 = lambda s: (s ** (-1.0 - N * pc / p) * Gamma.eval(s) ** (-pc)
                       * np.exp(c1 * pc * dini.hi(s)))
    notes = ()
    if not dini._flat:
        notes = (f"dini truncated at r_min; bracket slack {dini.slack:.4g}",)
    rep2 = _product_condition(ids[1], j2_f0, p, j2_f1, pc, mc, settings, notes)
    return rep1, rep2


def check_existence_conditions(gamma: RadialWeight, Gamma: RadialWeight,
                               surf: LipschitzGraph, mc: ModelConstants,
                               settings: ScanSettings | None = None):
    """The two suprema sufficient for solvability with the solution bound.

    Requires ``N/M < p < N``.
    """
    mc.require_exponent_window()
    settings = settings or ScanSettings()
    return _existence_pair(gamma, Gamma, surf, mc, settings,
                           ("existence_plain", "existence_dini"))


def check_inverse_conditions(gamma: RadialWeight, Gamma: RadialWeight,
                             surf: LipschitzGraph, mc: ModelConstants,
                             settings: ScanSettings | None = None):
    """Inverse-continuity suprema; the same integrals as the existence pair."""
    settings = settings or ScanSettings()
    return _existence_pair(gamma, Gamma, surf, mc, settings,
                           ("inverse_first", "inverse_second"))


def check_uniqueness_asymptotics(gamma: RadialWeight, surf: LipschitzGraph,
                                 mc: ModelConstants,
                                 settings: ScanSettings | None = None):
    """Big-O growth caps on ``1/gamma`` at the origin and at infinity."""
    settings = settings or ScanSettings()
    N, p = mc.N, mc.p
    bound0 = N / p - mc.M
    rep0 = _slope_condition(
        "uniqueness_origin",
        lambda r: gamma.eval(r) ** -1.0 * r ** (-bound0),
        ZERO, f"1/gamma = O(r^{bound0:.6g}) toward zero", mc, settings)

    dini = DiniAccumulator(surf, settings.grid.r_min, settings.grid.r_max,
                           settings.dini_slack_decades)
    anchor = dini.lo(1.0)

    def tail_ratio(r):
        return (gamma.eval(r) ** -1.0 * r ** (-N / p)
                * math.exp(mc.c1 * float(dini.lo(r) - anchor)))

    rep_inf = _slope_condition(
        "uniqueness_tail", tail_ratio, INFINITY,
        "1/gamma = O(r^{N/p} exp(-c1 dini(1,r))) toward infinity", mc, settings)
    return rep0, rep_inf


def check_inclusion_conditions(gamma: RadialWeight, Gamma: RadialWeight,
                               mc: ModelConstants,
                               settings: ScanSettings | None = None):
    """Integral pairs placing the weighted spaces inside the seminorm spaces."""
    settings = settings or ScanSettings()
    N, p, pc, M = mc.N, mc.p, mc.p_conj, mc.M
    snapshot = mc.snapshot()

    def pair_report(condition_id, f_zero, f_inf):
        v0, val0, t0 = _one_sided_integral(f_zero, ZERO, settings)
        v1, val1, t1 = _one_sided_integral(f_inf, INFINITY, settings)
        verdict = _combine(v0, v1)
        total = None if (val0 is None or val1 is None) else val0 + val1
        notes = (f"zero-side exponent {t0.fitted_exponent:.4g}, "
                 f"infinity-side exponent {t1.fitted_exponent:.4g}",)
        return ConditionReport(condition_id, verdict, total, None, False,
                               verdict == FAILS, (), snapshot, notes)

    leb = pair_report(
        "inclusion_lebesgue",
        lambda s: s ** (N - 1.0) * gamma.eval(s) ** (-pc),
        lambda s: s ** (-N * pc / p - 1.0) * gamma.eval(s) ** (-pc),
    )
    sob = pair_report(
        "inclusion_sobolev",
        lambda s: s ** ((M - N / p) * pc - 1.0) * Gamma.eval(s) ** (-pc),
        lambda s: s ** (-N * pc / p - 1.0) * Gamma.eval(s) ** (-pc),
    )
    return leb, sob


def check_continuity_conditions(gamma: RadialWeight, Gamma: RadialWeight,
                                mc: ModelConstants,
                                settings: ScanSettings | None = None):
    """Two-factor suprema controlling the forward map u -> grad(potential)."""
    settings = settings or ScanSettings()
    N, p, pc = mc.N, mc.p, mc.p_conj
    b1 = _product_condition(
        "continuity_first",
        lambda s: s ** (N - 1.0) * gamma.eval(s) ** (-pc), pc,
        lambda s: s ** (N - 1.0 - N * p) * Gamma.eval(s) ** p, p,
        mc, settings)
    b2 = _product_condition(
        "continuity_second",
        lambda s: s ** (N - 1.0) * Gamma.eval(s) ** p, p,
        lambda s: s ** (-(1.0 + N * pc / p)) * gamma.eval(s) ** (-pc), pc,
        mc, settings)
    return b1, b2


def _ratio_bounded_report(condition_id, num: RadialWeight, den: RadialWeight,
                          mc, settings, label) -> ConditionReport:
    nodes = settings.grid.nodes
    vals = num.eval(nodes) / den.eval(nodes)
    s0 = _end_slope(nodes, vals, ZERO, settings.grid.points_per_decade)
    s1 = _end_slope(nodes, vals, INFINITY, settings.grid.points_per_decade)
    verdict = _combine(_growth_verdict(s0, ZERO, settings),
                       _growth_verdict(s1, INFINITY, settings))
    k = int(np.argmax(vals))
    return ConditionReport(condition_id, verdict, float(vals[k]), float(nodes[k]),
                           k in (0, len(nodes) - 1), verdict == FAILS,
                           tuple(zip(nodes.tolist(), vals.tolist())),
                           mc.snapshot(),
                           (f"{label}: end slopes {s0:.4g} / {s1:.4g}",))


def check_isomorphism_logderiv(gamma: RadialWeight, Gamma: RadialWeight,
                               surf: LipschitzGraph, mc: ModelConstants,
                               settings: ScanSettings | None = None) -> ConditionReport:
    """Simplified isomorphism criterion for a.e.-differentiable weights.

    Checks the open log-derivative windows for both weights together with
    boundedness of both weight ratios.  ``holds`` certifies the sufficient
    conditions on the probe range; ``fails`` proves nothing (the criterion
    is one-sided).
    """
    settings = settings or ScanSettings()
    mc.require_exponent_window()
    N, p = mc.N, mc.p
    lam0 = mc.lambda0
    band = settings.marginal_band
    lower_g = mc.c1 * lam0 - N / p
    lower_G = 1.0 - N / p
    upper = N - mc.c2 * lam0 - N / p

    inf_g, sup_g = gamma.log_derivative_bounds(settings.grid)
    inf_G, sup_G = Gamma.log_derivative_bounds(settings.grid)

    def window_verdict(lo_margin, hi_margin):
        m = min(lo_margin, hi_margin)
        if m > band:
            return HOLDS
        if m >= -band:
            return MARGINAL
        return FAILS

    v_g = window_verdict(inf_g - lower_g, upper - sup_g)
    v_G = window_verdict(inf_G - lower_G, upper - sup_G)

    ratio1 = _ratio_bounded_report("_ratio_Gg", Gamma, gamma, mc, settings, "Gamma/gamma")
    ratio2 = _ratio_bounded_report("_ratio_gG", gamma, Gamma, mc, settings, "gamma/Gamma")
    verdict = _combine(v_g, v_G, ratio1.verdict, ratio2.verdict)
    notes = (
        f"gamma log-derivative range [{inf_g:.6g}, {sup_g:.6g}] vs ({lower_g:.6g}, {upper:.6g})",
        f"Gamma log-derivative range [{inf_G:.6g}, {sup_G:.6g}] vs ({lower_G:.6g}, {upper:.6g})",
        f"ratio sups {ratio1.sup_estimate:.6g} / {ratio2.sup_estimate:.6g}"
        if ratio1.sup_estimate is not None and ratio2.sup_estimate is not None
        else "ratio scan divergent",
    )
    sup_est = None
    if ratio1.sup_estimate is not None and ratio2.sup_estimate is not None:
        sup_est = max(ratio1.sup_estimate, ratio2.sup_estimate)
    return ConditionReport("isomorphism_logderiv", verdict, sup_est, None,
                           ratio1.boundary_flag or ratio2.boundary_flag,
                           verdict == FAILS, (), mc.snapshot(), notes)


def check_power_alpha(alpha: float, mc: ModelConstants,
                      settings: ScanSettings | None = None) -> ConditionReport:
    """Open-interval criterion for equal power weights ``r^alpha``.

    ``1 < alpha + N/p < N - c2 lambda0`` with marginal verdicts within
    1e-12 of either endpoint.  Requires ``N/M < p < N``.
    """
    mc.require_exponent_window()
    value = alpha + mc.N / mc.p
    lower, upper = 1.0, mc.N - mc.c2 * mc.lambda0
    margin = min(value - lower, upper - value)
    if margin > 1e-12:
        verdict = HOLDS
    elif margin >= -1e-12:
        verdict = MARGINAL
    else:
        verdict = FAILS
    note = (f"alpha + N/p = {value!r} vs open interval ({lower!r}, {upper!r})",)
    return ConditionReport("power_interval", verdict, value, None, False,
                           False, (), mc.snapshot(), note)


# --- Hardy pair verification -----------------------------------------------------

def _normalize_direction(direction: str) -> str:
    d = direction.lower().replace("-", "_")
    if d in ("from_zero", "fromzero", "zero"):
        return FROM_ZERO
    if d in ("from_infinity", "frominfinity", "infinity"):
        return FROM_INFINITY
    raise ConfigError(f"unknown direction {direction!r}")


def _truncated_power_ratio(U, V, p, direction, e, a, b, quad_tol):
    """Rayleigh quotient of the trial density ``g = s^e`` on ``[a, b]``."""
    pc = p / (p - 1.0)

    def primitive(r):
        # integral of s^e from a to r (from-zero) clipped to the support
        rr = np.clip(r, a, b)
        if abs(e + 1.0) < 1e-14:
            return np.log(rr / a)
        return (rr ** (e + 1.0) - a ** (e + 1.0)) / (e + 1.0)

    den_p = integrate_log_space(lambda s: V(s) ** p * s ** (e * p), a, b, quad_tol)
    if den_p <= 0:
        return 0.0
    if direction == FROM_ZERO:
        body = integrate_log_space(lambda r: U(r) ** p * primitive(r) ** p, a, b, quad_tol)
        g_total = primitive(b)
        tail = adaptive_integral(lambda r: U(r) ** p, b, math.inf, quad_tol)
        num_p = body + g_total ** p * tail
    else:
        def co_primitive(r):
            rr = np.clip(r, a, b)
            if abs(e + 1.0) < 1e-14:
                return np.log(b / rr)
            return (b ** (e + 1.0) - rr ** (e + 1.0)) / (e + 1.0)

        body = integrate_log_space(lambda r: U(r) ** p * co_primitive(r) ** p, a, b, quad_tol)
        g_total = co_primitive(a)
        head = integrate_log_space(lambda r: U(r) ** p, a * 1e-12, a, quad_tol)
        num_p = body + g_total ** p * head
    return (num_p / den_p) ** (1.0 / p)


def hardy_verify(U: Callable, V: Callable, mc: ModelConstants, direction: str,
                 settings: ScanSettings | None = None) -> HardyReport:
    """Two-factor constant of a Hardy pair and its empirical least constant.

    ``B`` is the supremum of the dual-exponent factor product; the least
    constant of the corresponding inequality is sandwiched between ``B``
    and ``p^{1/p} (p')^{1/p'} B``.  ``C_empirical`` maximizes the Rayleigh
    quotient over truncated power densities and must land in the sandwich.

    Raises DivergentB when the supremum scan diverges.
    """
    settings = settings or ScanSettings()
    direction = _normalize_direction(direction)
    p, pc = mc.p, mc.p_conj
    nodes = settings.grid.nodes

    if _is_zero_function(U, nodes):
        return HardyReport(0.0, 0.0, 0.0, 0.0, direction, p)

    Up = lambda s: np.abs(U(s)) ** p
    Vd = lambda s: np.abs(V(s)) ** (-pc)
    if direction == FROM_ZERO:
        rep = _product_condition("_hardy_B", Vd, pc, Up, p, mc, settings)
    else:
        rep = _product_condition("_hardy_B", Up, p, Vd, pc, mc, settings)
    if rep.verdict == FAILS or rep.sup_estimate is None:
        raise DivergentB(f"Hardy factor product diverges: {rep.notes}")
    B = rep.sup_estimate
    upper = p ** (1.0 / p) * pc ** (1.0 / pc) * B

    # Trial family: truncated powers around the critical exponent -1/p plus
    # the witness exponents realizing B itself (g = V^{-p'} cut at the
    # argmax radius); supports widen up to ~70 decades, which is where the
    # logarithmic corrections to the extremal quotient become small.
    candidates = set(np.round(-1.0 / p + np.linspace(-0.45, 0.45, 19), 6).tolist())
    t_lo = settings.classify(lambda s: max(V(s), 1e-300), ZERO)
    t_hi = settings.classify(lambda s: max(V(s), 1e-300), INFINITY)
    for t in (t_lo, t_hi):
        if math.isfinite(t.fitted_exponent):
            candidates.add(round(-pc * t.fitted_exponent / p - 1.0 / p, 6))
            candidates.add(round(-pc * t.fitted_exponent, 6))
    spans = np.linspace(1.0, 36.0, 15)
    center = 1.0

    def evaluate(e, k, c):
        a, b = c * 10.0 ** (-k), c * 10.0 ** k
        return _truncated_power_ratio(U, V, p, direction, e, a, b,
                                      settings.quad_tol)

    best = (0.0, None)
    for e in sorted(candidates):
        for k in spans:
            r = evaluate(e, k, center)
            if r > best[0]:
                best = (r, (e, k, center))
    # Local refinement: shrink neighbourhoods around the best trial until
    # the improvement per round drops below 0.5%.
    if best[1] is not None:
        de, dk = 0.05, 4.0
        for _ in range(8):
            before = best[0]
            e, k, c = best[1]
            for ee in (e - de, e, e + de):
                for kk in (max(1.0, k - dk), k, min(40.0, k + dk)):
                    r = evaluate(ee, kk, c)
                    if r > best[0]:
                        best = (r, (ee, kk, c))
            de *= 0.5
            dk *= 0.6
            if best[0] < before * 1.005:
                break
    C_emp = best[0]
    trial = {}
    if best[1] is not None:
        e, k, c = best[1]
        trial = {"exponent": e, "support": [c * 10.0 ** (-k), c * 10.0 ** k]}
    return HardyReport(B, B, upper, C_emp, direction, p, trial)


# --- integration-by-parts bound ----------------------------------------------------

def verify_pi_lemma(g: RadialWeight, alpha: float, beta: float,
                    grid: RadialGrid, side: str,
                    settings: ScanSettings | None = None,
                    tol: float = 1e-6) -> PiLemmaReport:
    """Pointwise check of the one-weight integration-by-parts bound.

    With ``C = essinf (1 +/- (beta/alpha) * s g'(s)/g(s)) > 0`` the cumulative
    integral of ``s^{alpha-1} g^beta`` (zero side) or ``s^{-alpha-1} g^beta``
    (infinity side) is bounded by ``r^{+/-alpha} g(r)^beta / (alpha C)`` at
    every radius; for pure powers the bound is an identity.

    Raises HypothesisFails when ``C <= 0``; the exception carries the
    report, since a failed hypothesis is a finding, not a test failure.
    """
    if alpha <= 0:
        raise ConfigError("alpha must be positive")
    if beta == 0:
        raise ConfigError("beta must be nonzero")
    if side not in (ZERO, INFINITY):
        raise ConfigError(f"side must be '{ZERO}' or '{INFINITY}'")
    settings = settings or ScanSettings(grid=grid)
    nodes = grid.nodes
    brk = set(g.breakpoints())
    ld_nodes = np.asarray([r for r in nodes if r not in brk])
    sign = 1.0 if side == ZERO else -1.0
    C = float(np.min(1.0 + sign * (beta / alpha) * g.log_derivative(ld_nodes)))

    if C <= 0:
        report = PiLemmaReport(side, alpha, beta, C, False, math.nan, math.nan, math.nan)
        err = HypothesisFails(f"essinf constant {C:.6g} <= 0; bound not applicable")
        err.report = report
        raise err

    if side == ZERO:
        f = lambda s: s ** (alpha - 1.0) * g.eval(s) ** beta
        t0 = settings.classify(f, ZERO)
        if not t0.convergent:
            raise ConfigError(
                "cumulative integral diverges at 0 despite positive constant; "
                "profile not power-like below the grid")
        lhs = _cumulative_from_zero(f, nodes, t0)
        rhs = nodes ** alpha * g.eval(nodes) ** beta / (alpha * C)
    else:
        f = lambda s: s ** (-alpha - 1.0) * g.eval(s) ** beta
        t1 = settings.classify(f, INFINITY)
        if not t1.convergent:
            raise ConfigError(
                "cumulative integral diverges at infinity despite positive "
                "constant; profile not power-like beyond the grid")
        lhs = _cumulative_to_infinity(f, nodes, t1)
        rhs = nodes ** (-alpha) * g.eval(nodes) ** beta / (alpha * C)

    ratio = lhs / rhs
    k = int(np.argmax(ratio))
    return PiLemmaReport(side, alpha, beta, C, True, float(ratio[k]),
                         float(np.max(np.abs(ratio - 1.0))), float(nodes[k]))


# --- battery -----------------------------------------------------------------------

def run_condition_battery(gamma: RadialWeight, Gamma: RadialWeight,
                          surf: LipschitzGraph, mc: ModelConstants,
                          settings: ScanSettings | None = None,
                          which: Sequence[str] | None = None) -> list[ConditionReport]:
    """Run the requested conditions in canonical order.

    ``power_interval`` is included only when both weights are the same pure
    power (its hypothesis).  Raises PreconditionViolated when a requested
    check needs ``N/M < p < N`` and the constants sit outside it.
    """
    settings = settings or ScanSettings()
    requested = tuple(which) if which else CONDITION_IDS
    unknown = set(requested) - set(CONDITION_IDS)
    if unknown:
        raise ConfigError(f"unknown condition ids: {sorted(unknown)}")
    reports: dict[str, ConditionReport] = {}

    def want(*ids):
        return any(i in requested for i in ids)

    if want("equivalent_norm"):
        reports["equivalent_norm"] = check_equivalent_norm(Gamma, mc, settings)
    if want("existence_plain", "existence_dini"):
        r1, r2 = check_existence_conditions(gamma, Gamma, surf, mc, settings)
        reports["existence_plain"], reports["existence_dini"] = r1, r2
    if want("uniqueness_origin", "uniqueness_tail"):
        r1, r2 = check_uniqueness_asymptotics(gamma, surf, mc, settings)
        reports["uniqueness_origin"], reports["uniqueness_tail"] = r1, r2
    if want("inclusion_lebesgue", "inclusion_sobolev"):
        r1, r2 = check_inclusion_conditions(gamma, Gamma, mc, settings)
        reports["inclusion_lebesgue"], reports["inclusion_sobolev"] = r1, r2
    if want("continuity_first", "continuity_second"):
        r1, r2 = check_continuity_conditions(gamma, Gamma, mc, settings)
        reports["continuity_first"], reports["continuity_second"] = r1, r2
    if want("inverse_first", "inverse_second"):
        r1, r2 = check_inverse_conditions(gamma, Gamma, surf, mc, settings)
        reports["inverse_first"], reports["inverse_second"] = r1, r2
    if want("isomorphism_logderiv"):
        reports["isomorphism_logderiv"] = check_isomorphism_logderiv(
            gamma, Gamma, surf, mc, settings)
    if want("power_interval"):
        same_power = (gamma.family == "power" and Gamma.family == "power"
                      and gamma.params["alpha"] == Gamma.params["alpha"])
        if same_power:
            reports["power_interval"] = check_power_alpha(
                gamma.params["alpha"], mc, settings)
    return [reports[i] for i in CONDITION_IDS if i in reports and i in requested]
