"""Shared numerical substrate.

Model constants, geometric radial grids, one-dimensional adaptive
quadrature, power-law tail classification, and supremum scanning.  All
radial integrals in the condition checkers and the norm machinery are
built from these pieces.

Every function here is pure: no global state, deterministic output for
fixed inputs.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np

from .errors import (
    ConfigError,
    InsufficientSamples,
    NonFinite,
    PreconditionViolated,
    ToleranceNotMet,
)

# Verdict vocabulary shared by tail classification and condition reports.
CONVERGENT = "convergent"
DIVERGENT = "divergent"
MARGINAL = "marginal"

ZERO = "zero"
INFINITY = "infinity"


@dataclass(frozen=True)
class ModelConstants:
    """Dimension, Lebesgue exponent and the abstract surface constants.

    ``N`` is the dimension of the parameter domain (the surface lives in
    ``R^{N+1}``).  The constants ``c1``, ``c2``, ``c3`` and the roughness
    threshold ``lambda_star`` are only known to exist; they are treated as
    configuration with defaults ``c1 = c2 = c3 = 1`` and
    ``lambda_star = min(1/(2 c1), (N-1)/(2 c2))``, which satisfies the
    standing assumptions ``c1 lambda_star <= 1/2`` and
    ``c2 lambda_star <= (N-1)/2``.
    """

    N: int
    p: float
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    lambda_star: float | None = None
    lambda0: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ConfigError(f"dimension N must be an integer >= 2, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if not (1.0 < self.p < math.inf):
            raise ConfigError(f"exponent p must lie in (1, inf), got {self.p}")
        for name in ("c1", "c2", "c3"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.lambda0 < 0:
            raise ConfigError("lambda0 must be nonnegative")
        if self.lambda_star is None:
            cap1 = 0.5 / self.c1 if self.c1 > 0 else math.inf
            cap2 = 0.5 * (self.N - 1) / self.c2 if self.c2 > 0 else math.inf
            object.__setattr__(self, "lambda_star", min(cap1, cap2))
        slack = 1e-12
        if self.c1 * self.lambda_star > 0.5 + slack:
            raise ConfigError("standing assumption c1*lambda_star <= 1/2 violated")
        if self.c2 * self.lambda_star > 0.5 * (self.N - 1) + slack:
            raise ConfigError("standing assumption c2*lambda_star <= (N-1)/2 violated")

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def M(self) -> float:
        return self.N - self.c2 * self.lambda0

    @property
    def in_exponent_window(self) -> bool:
        """True when N/M < p < N, the window for existence/isomorphism checks."""
        return self.N / self.M < self.p < self.N

    def require_exponent_window(self):
        if not self.in_exponent_window:
            raise PreconditionViolated(
                f"p={self.p} outside the admissible window "
                f"({self.N / self.M:.6g}, {self.N}) for N={self.N}, M={self.M:.6g}"
            )

    def with_lambda0(self, lambda0: float) -> "ModelConstants":
        return ModelConstants(self.N, self.p, self.c1, self.c2, self.c3,
                              self.lambda_star, lambda0)

    def snapshot(self) -> dict:
        return {
            "N": self.N, "p": self.p, "p_conj": self.p_conj,
            "c1": self.c1, "c2": self.c2, "c3": self.c3,
            "lambda_star": self.lambda_star, "lambda0": self.lambda0,
            "M": self.M,
        }


@dataclass(frozen=True)
class RadialGrid:
    """Geometric probe grid on ``[r_min, r_max]``.

    Node count is ``points_per_decade * log10(r_max/r_min)`` rounded up;
    consecutive node ratios are constant.
    """

    r_min: float
    r_max: float
    points_per_decade: int = 32

    def __post_init__(self):
        if not (0 < self.r_min < self.r_max):
            raise ConfigError("need 0 < r_min < r_max")
        if self.points_per_decade < 1:
            raise ConfigError("points_per_decade must be >= 1")

    @property
    def decades(self) -> float:
        return math.log10(self.r_max / self.r_min)

    @cached_property
    def nodes(self) -> np.ndarray:
        n = max(2, math.ceil(self.points_per_decade * self.decades))
        return np.geomspace(self.r_min, self.r_max, n)

    def refined(self, factor: int = 2) -> "RadialGrid":
        return RadialGrid(self.r_min, self.r_max, self.points_per_decade * factor)


@dataclass(frozen=True)
class TailClass:
    """Power-law fit of a positive function near one end of ``(0, inf)``."""

    verdict: str
    fitted_exponent: float
    residual: float
    window: tuple[float, float] = (0.0, 0.0)

    @property
    def convergent(self) -> bool:
        return self.verdict == CONVERGENT

    @property
    def divergent(self) -> bool:
        return self.verdict == DIVERGENT

    @property
    def marginal(self) -> bool:
        return self.verdict == MARGINAL


class ScanResult(NamedTuple):
    sup_value: float
    argmax_r: float
    boundary_flag: bool


# --- Gauss-Kronrod 7/15 pair -------------------------------------------------

_XK = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0,
    0.207784955007898, 0.405845151377397, 0.586087235467691,
    0.741531185599394, 0.864864423359769, 0.949107912342759,
    0.991455371120813,
])
_WK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
    0.204432940075298, 0.190350578064785, 0.169004726639267,
    0.140653259715525, 0.104790010322250, 0.063092092629979,
    0.022935322010529,
])
# Gauss-7 weights aligned with every second Kronrod node.
_WG = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469,
    0.381830050505119, 0.279705391489277, 0.129484966168870,
])


def _eval(f: Callable, x: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on an array, falling back to a scalar loop."""
    try:
        y = np.asarray(f(x), dtype=float)
        if y.shape == x.shape:
            return y
    except Exception:
        pass
    return np.array([float(f(xi)) for xi in x])


def _gk_panel(f: Callable, a: float, b: float) -> tuple[float, float]:
    """Kronrod-15 estimate on [a, b] and the |K15 - G7| error indicator."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = mid + half * _XK
    y = _eval(f, x)
    if not np.all(np.isfinite(y)):
        bad = x[~np.isfinite(y)][0]
        raise NonFinite(f"integrand non-finite at {bad!r}")
    k15 = half * float(np.dot(_WK, y))
    g7 = half * float(np.dot(_WG, y[1::2]))
    err = abs(k15 - g7)
    # Sharpen the raw difference the usual way; it overestimates badly
    # on smooth panels otherwise.
    scale = half * float(np.dot(_WK, np.abs(y)))
    if scale > 0 and err > 0:
        err = scale * min(1.0, (200.0 * err / scale) ** 1.5)
    return k15, err


def _adaptive_finite(f, a, b, tol, max_panels, initial_splits=(), strict=True):
    pts = sorted({a, b, *[p for p in initial_splits if a < p < b]})
    heap = []
    counter = 0
    total, total_err = 0.0, 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, err = _gk_panel(f, lo, hi)
        heapq.heappush(heap, (-err, counter, lo, hi, val))
        counter += 1
        total += val
        total_err += err
    panels = len(heap)
    while total_err > tol and total_err > 1e-14 * abs(total):
        if panels >= max_panels:
            if not strict:
                break
            raise ToleranceNotMet(
                f"refinement budget exhausted: error {total_err:.3e} > tol {tol:.3e}"
            )
        neg_err, _, lo, hi, val = heapq.heappop(heap)
        total -= val
        total_err += neg_err  # neg_err is -err
        mid = 0.5 * (lo + hi)
        for lo2, hi2 in ((lo, mid), (mid, hi)):
            v, e = _gk_panel(f, lo2, hi2)
            heapq.heappush(heap, (-e, counter, lo2, hi2, v))
            counter += 1
            total += v
            total_err += e
        panels += 1
    # Fixed-order pairwise summation for run-to-run determinism.
    vals = sorted((item[1], item[4]) for item in heap)
    return float(np.sum([v for _, v in vals])), total_err


def adaptive_integral(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = 1e-10,
    *,
    max_panels: int = 4000,
    split_points: tuple[float, ...] = (),
) -> float:
    """Adaptive Gauss-Kronrod integral of ``f`` over ``(a, b)``.

    ``b = inf`` is handled by the substitution ``s -> 1/s`` on the tail.
    The estimated absolute error is at most ``tol`` (or negligible relative
    to the result).  Endpoint singularities are tolerated because all
    quadrature nodes are interior.

    Raises
    ------
    NonFinite
        if ``f`` returns NaN or +/-inf at an interior node.
    ToleranceNotMet
        if the refinement budget is exhausted above ``tol``.
    """
    if not (0 <= a < b):
        raise ConfigError(f"need 0 <= a < b, got a={a}, b={b}")
    if math.isinf(b):
        cut = max(a, 1.0)
        total = 0.0
        if cut > a:
            v, _ = _adaptive_finite(f, a, cut, 0.5 * tol, max_panels, split_points)
            total += v
        g = lambda t: _eval(f, 1.0 / t) / t**2
        v, _ = _adaptive_finite(g, 0.0, 1.0 / cut, 0.5 * tol, max_panels)
        return total + v
    v, _ = _adaptive_finite(f, a, b, tol, max_panels, split_points)
    return v


def integrate_log_space(f: Callable, a: float, b: float, tol: float = 1e-12,
                        *, max_panels: int = 4000) -> float:
    """``integral_a^b f(s) ds`` via the substitution ``s = exp(t)``.

    The workhorse for integrands that are smooth in ``log s`` over many
    decades (powers, powers times slow exponentials).
    """
    if not (0 < a < b):
        raise ConfigError(f"need 0 < a < b, got a={a}, b={b}")
    g = lambda t: _eval(f, np.exp(t)) * np.exp(t)
    v, _ = _adaptive_finite(g, math.log(a), math.log(b), tol, max_panels)
    return v


def segment_integral(f: Callable, a: float, b: float, *, rel_tol: float = 1e-12,
                     max_panels: int = 80) -> float:
    """Integral over one geometric cell with a relative stopping rule.

    Used by cumulative scans where neighbouring cells differ by many orders
    of magnitude, so a single absolute tolerance is meaningless.
    """
    est, _ = _gk_panel(f, a, b)
    tol = max(rel_tol * abs(est), 1e-280)
    v, _ = _adaptive_finite(f, a, b, tol, max_panels, strict=False)
    return v


# --- tail classification ------------------------------------------------------

def _fit_loglog(r: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of log y against log r plus rms residual."""
    t = np.log(r)
    v = np.log(y)
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    resid = v - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))


def tail_classify(
    f: Callable,
    end: str,
    *,
    ref: float = 1.0,
    decades: float = 18.0,
    points_per_decade: int = 8,
    marginal_band: float = 0.05,
    exact_tol: float = 1e-6,
) -> TailClass:
    """Classify convergence of ``integral f(s) ds`` toward one end.

    Probes ``f`` on a geometric ladder stretching ``decades`` decades from
    ``ref`` toward the requested end and fits a power-law exponent ``e``
    over the last decade.  The integral diverges for ``e >= -1`` at
    infinity (``e <= -1`` at zero).  Within ``marginal_band`` of the
    critical exponent the verdict is marginal, never silently convergent;
    the single exception is a numerically pure power law sitting exactly
    on the critical exponent, which is reported divergent.
    """
    if end not in (ZERO, INFINITY):
        raise ConfigError(f"end must be '{ZERO}' or '{INFINITY}'")
    sign = 1.0 if end == INFINITY else -1.0
    n = int(decades * points_per_decade)
    ladder = ref * 10.0 ** (sign * np.arange(n + 1) / points_per_decade)
    window = ladder[-(points_per_decade + 1):]
    y = _eval(f, window)
    good = np.isfinite(y) & (y > 0)
    if np.all(np.abs(y[np.isfinite(y)]) == 0.0):
        # Identically zero tail: trivially convergent.
        e = -math.inf if end == INFINITY else math.inf
        return TailClass(CONVERGENT, e, 0.0, (float(window[0]), float(window[-1])))
    if good.sum() < 4:
        raise InsufficientSamples(
            f"only {int(good.sum())} usable probe nodes near {end}"
        )
    e, resid = _fit_loglog(window[good], y[good])
    crit = -1.0
    dist = e - crit
    if end == ZERO:
        dist = -dist  # divergence side is e <= -1 at zero
    if abs(dist) < marginal_band:
        if abs(dist) <= exact_tol and resid <= 1e-9:
            verdict = DIVERGENT  # exactly critical pure power
        else:
            verdict = MARGINAL
    elif dist > 0:
        verdict = DIVERGENT
    else:
        verdict = CONVERGENT
    lo, hi = float(min(window[0], window[-1])), float(max(window[0], window[-1]))
    return TailClass(verdict, e, resid, (lo, hi))


def supremum_scan(g: Callable, grid: RadialGrid) -> ScanResult:
    """Maximum of ``g`` over the grid nodes.

    ``boundary_flag`` is set when the argmax is the first or last node,
    indicating the supremum may live outside ``[r_min, r_max]``.

    Raises NonFinite if ``g`` is non-finite at any node.
    """
    r = grid.nodes
    y = _eval(g, r)
    if not np.all(np.isfinite(y)):
        bad = r[~np.isfinite(y)][0]
        raise NonFinite(f"scan function non-finite at r={bad!r}")
    k = int(np.argmax(y))
    return ScanResult(float(y[k]), float(r[k]), k in (0, len(r) - 1))


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere S^{N-1} in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)
