"""Radial weight functions on ``(0, inf)``.

A weight is positive, radial and doubling:  ``w(2r) <= C w(r)`` with a
uniform constant.  Shipped families:

* ``power``            ``r^alpha``
* ``piecewise_power``  ``(r/b)^alpha1`` below the break ``b``, ``(r/b)^alpha2``
                       above it (continuous at the break by construction)
* ``power_log``        ``log(1 + r)^alpha``
* ``custom``           samples interpolated linearly in log-log coordinates,
                       extrapolated with the end-segment slopes

Each family carries an analytic logarithmic derivative ``r w'(r)/w(r)``
where one exists; custom weights use the piecewise-constant slope of the
log-log interpolant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import RadialGrid
from .errors import ConfigError, DomainError, NotDifferentiable

POWER = "power"
PIECEWISE = "piecewise"
POWERLOG = "powerlog"
CUSTOM = "custom"


@dataclass(frozen=True)
class RadialWeight:
    """Positive radial weight with evaluation and logarithmic derivative."""

    family: str
    params: dict = field(default_factory=dict)
    # custom family only: log-log sample table
    _log_r: np.ndarray | None = None
    _log_w: np.ndarray | None = None

    # --- constructors ---------------------------------------------------

    @staticmethod
    def power(alpha: float) -> "RadialWeight":
        return RadialWeight(POWER, {"alpha": float(alpha)})

    @staticmethod
    def piecewise_power(alpha1: float, alpha2: float, break_r: float = 1.0) -> "RadialWeight":
        if break_r <= 0:
            raise ConfigError("break_r must be positive")
        return RadialWeight(PIECEWISE, {
            "alpha1": float(alpha1), "alpha2": float(alpha2), "break_r": float(break_r),
        })

    @staticmethod
    def power_log(alpha: float) -> "RadialWeight":
        return RadialWeight(POWERLOG, {"alpha": float(alpha)})

    @staticmethod
    def custom(radii, values) -> "RadialWeight":
        r = np.asarray(radii, dtype=float)
        w = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.shape != w.shape or len(r) < 2:
            raise ConfigError("custom weight needs two equal-length 1-d sample arrays")
        if np.any(r <= 0) or np.any(w <= 0):
            raise ConfigError("custom weight samples must be strictly positive")
        order = np.argsort(r)
        r, w = r[order], w[order]
        if np.any(np.diff(r) <= 0):
            raise ConfigError("custom weight radii must be distinct")
        return RadialWeight(CUSTOM, {"n_samples": len(r)},
                            _log_r=np.log(r), _log_w=np.log(w))

    # --- evaluation -----------------------------------------------------

    def eval(self, r):
        """Weight value; raises DomainError off ``(0, inf)``."""
        arr = np.asarray(r, dtype=float)
        if np.any(arr <= 0):
            raise DomainError("weight evaluated at r <= 0")
        if self.family == POWER:
            out = arr ** self.params["alpha"]
        elif self.family == POWERLOG:
            out = np.log1p(arr) ** self.params["alpha"]
        elif self.family == PIECEWISE:
            a1, a2, b = (self.params[k] for k in ("alpha1", "alpha2", "break_r"))
            q = arr / b
            out = np.where(arr < b, q ** a1, q ** a2)
        elif self.family == CUSTOM:
            out = np.exp(np.interp(np.log(arr), self._log_r, self._log_w))
            out = self._extrapolate(arr, out)
        else:  # pragma: no cover
            raise ConfigError(f"unknown weight family {self.family!r}")
        return out if np.ndim(r) else float(out)

    def __call__(self, r):
        return self.eval(r)

    def _extrapolate(self, arr, out):
        """Extend a custom weight beyond its sample range with end slopes."""
        lr = np.log(arr)
        lo, hi = self._log_r[0], self._log_r[-1]
        s_lo = (self._log_w[1] - self._log_w[0]) / (self._log_r[1] - self._log_r[0])
        s_hi = (self._log_w[-1] - self._log_w[-2]) / (self._log_r[-1] - self._log_r[-2])
        out = np.where(lr < lo, np.exp(self._log_w[0] + s_lo * (lr - lo)), out)
        out = np.where(lr > hi, np.exp(self._log_w[-1] + s_hi * (lr - hi)), out)
        return out

    # --- logarithmic derivative ------------------------------------------

    def log_derivative(self, r):
        """``r w'(r) / w(r)``, analytic per family.

        Raises NotDifferentiable at a piecewise-power breakpoint.
        """
        arr = np.asarray(r, dtype=float)
        if np.any(arr <= 0):
            raise DomainError("log derivative requested at r <= 0")
        if self.family == POWER:
            out = np.full_like(arr, self.params["alpha"])
        elif self.family == POWERLOG:
            alpha = self.params["alpha"]
            out = alpha * arr / ((1.0 + arr) * np.log1p(arr))
        elif self.family == PIECEWISE:
            a1, a2, b = (self.params[k] for k in ("alpha1", "alpha2", "break_r"))
            if np.any(arr == b):
                raise NotDifferentiable(f"piecewise weight has a corner at r={b}")
            out = np.where(arr < b, a1, a2)
        elif self.family == CUSTOM:
            lr = np.log(arr)
            slopes = np.diff(self._log_w) / np.diff(self._log_r)
            idx = np.clip(np.searchsorted(self._log_r, lr) - 1, 0, len(slopes) - 1)
            out = slopes[idx]
        else:  # pragma: no cover
            raise ConfigError(f"unknown weight family {self.family!r}")
        return out if np.ndim(r) else float(out)

    def breakpoints(self) -> tuple[float, ...]:
        if self.family == PIECEWISE:
            return (self.params["break_r"],)
        if self.family == CUSTOM:
            return tuple(np.exp(self._log_r))
        return ()

    def log_derivative_bounds(self, grid: RadialGrid) -> tuple[float, float]:
        """(ess inf, ess sup) of the log derivative over the grid nodes.

        Breakpoints are excluded; for a pure power both bounds equal alpha
        exactly.  The grid is a probe of ``(0, inf)``, so the true essential
        bounds may live outside it -- callers pair this with boundary flags.
        """
        nodes = grid.nodes
        brk = self.breakpoints()
        if brk:
            keep = ~np.isclose(nodes[:, None], np.asarray(brk)[None, :]).any(axis=1)
            nodes = nodes[keep]
        vals = self.log_derivative(nodes)
        return float(np.min(vals)), float(np.max(vals))

    def doubling_constant(self, grid: RadialGrid) -> float:
        """sup over grid nodes of ``w(2r)/w(r)``."""
        nodes = grid.nodes
        return float(np.max(self.eval(2.0 * nodes) / self.eval(nodes)))

    def describe(self) -> dict:
        return {"family": self.family, **{k: v for k, v in self.params.items()}}


def from_spec(spec: dict) -> RadialWeight:
    """Build a weight from a configuration block (see the cli module)."""
    family = spec.get("family", POWER)
    if family == POWER:
        return RadialWeight.power(spec.get("alpha", 0.0))
    if family in (PIECEWISE, "piecewise_power"):
        return RadialWeight.piecewise_power(
            spec.get("alpha1", 0.0), spec.get("alpha2", 0.0), spec.get("break_r", 1.0)
        )
    if family in (POWERLOG, "power_log"):
        return RadialWeight.power_log(spec.get("alpha", 1.0))
    if family == CUSTOM:
        path = spec.get("samples_file")
        if not path:
            raise ConfigError("custom weight requires samples_file")
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        if data.shape[1] != 2:
            raise ConfigError("weight samples file must have two columns: r, value")
        return RadialWeight.custom(data[:, 0], data[:, 1])
    raise ConfigError(f"unknown weight family {family!r}")
