"""Basis functions: quantile and CVaR families plus B/M/I-spline machinery.

All evaluators are pure functions of frozen spec objects, so they are safe
for unrestricted concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .exceptions import ConfigurationError, DomainError

QUANTILE_KINDS = ("constant", "normal", "logistic", "exp_right", "exp_left", "ispline")
CVAR_KINDS = ("constant", "normal_cvar", "logistic_cvar", "exponential_cvar", "ispline")


@dataclass(frozen=True)
class KnotVector:
    """Clamped knot layout for a univariate spline basis of given degree.

    The full knot vector repeats ``lower`` and ``upper`` ``degree + 1`` times
    around the (nondecreasing) interior knots, so the basis has
    ``L = degree + len(interior) + 1`` elements.
    """

    lower: float
    upper: float
    interior: tuple[float, ...] = ()
    degree: int = 3

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ConfigurationError(f"knot domain is empty: [{self.lower}, {self.upper}]")
        if self.degree < 0:
            raise ConfigurationError(f"degree must be nonnegative, got {self.degree}")
        interior = tuple(float(t) for t in self.interior)
        object.__setattr__(self, "interior", interior)
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        if any(b < a for a, b in zip(interior, interior[1:])):
            raise ConfigurationError("interior knots must be nondecreasing")
        if interior and (interior[0] <= self.lower or interior[-1] >= self.upper):
            raise ConfigurationError("interior knots must lie strictly inside the domain")

    @property
    def size(self) -> int:
        """Number of basis elements L."""
        return self.degree + len(self.interior) + 1

    def full_knots(self) -> np.ndarray:
        d = self.degree
        return np.concatenate([[self.lower] * (d + 1), self.interior, [self.upper] * (d + 1)])


def equidistant_knots(lower, upper, n_interior, degree=3) -> KnotVector:
    """Knot vector with equally spaced interior knots."""
    interior = np.linspace(lower, upper, n_interior + 2)[1:-1]
    return KnotVector(lower, upper, tuple(interior), degree)


def quantile_knots(values, n_interior, degree=3) -> KnotVector:
    """Knot vector with interior knots at empirical quantiles of ``values``."""
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    qs = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    interior = np.quantile(values, qs, method="linear")
    interior = np.clip(interior, np.nextafter(lo, hi), np.nextafter(hi, lo))
    return KnotVector(lo, hi, tuple(interior), degree)


# ---------------------------------------------------------------------------
# Core B-spline evaluation (clamped, right-closed at the upper boundary)
# ---------------------------------------------------------------------------


def _find_span(t, degree, n_basis, x):
    # span s with t[s] <= x < t[s+1], collapsed to the valid range
    if x >= t[n_basis]:
        return n_basis - 1
    if x <= t[degree]:
        return degree
    lo, hi = degree, n_basis
    while True:
        mid = (lo + hi) // 2
        if x < t[mid]:
            hi = mid
        elif x >= t[mid + 1]:
            lo = mid + 1
        else:
            return mid


def _nonzero_basis(t, degree, span, x):
    # triangular recurrence; returns the degree+1 basis values that can be
    # nonzero at x (indices span-degree .. span)
    vals = np.zeros(degree + 1)
    left = np.zeros(degree + 1)
    right = np.zeros(degree + 1)
    vals[0] = 1.0
    for j in range(1, degree + 1):
        left[j] = x - t[span + 1 - j]
        right[j] = t[span + j] - x
        saved = 0.0
        for r in range(j):
            temp = vals[r] / (right[r + 1] + left[j - r])
            vals[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        vals[j] = saved
    return vals


def bspline_basis(knots: KnotVector, x: float) -> np.ndarray:
    """All L B-spline basis values at ``x`` inside the knot domain."""
    x = min(max(float(x), knots.lower), knots.upper)
    t = knots.full_knots()
    out = np.zeros(knots.size)
    span = _find_span(t, knots.degree, knots.size, x)
    out[span - knots.degree : span + 1] = _nonzero_basis(t, knots.degree, span, x)
    return out


def bspline_basis_derivative(knots: KnotVector, x: float) -> np.ndarray:
    """First derivative of every basis element at ``x`` (one-sided at the ends)."""
    d = knots.degree
    if d == 0:
        return np.zeros(knots.size)
    x = min(max(float(x), knots.lower), knots.upper)
    t = knots.full_knots()
    L = knots.size
    span = _find_span(t, d, L, x)
    lower_vals = np.zeros(L + 1)
    lower_vals[span - (d - 1) : span + 1] = _nonzero_basis(t, d - 1, span, x)
    out = np.zeros(L)
    for i in range(L):
        left = t[i + d] - t[i]
        right = t[i + d + 1] - t[i + 1]
        a = lower_vals[i] / left if left > 0 else 0.0
        b = lower_vals[i + 1] / right if right > 0 else 0.0
        out[i] = d * (a - b)
    return out


def mspline_basis(knots: KnotVector, x: float) -> np.ndarray:
    """M-spline values at ``x``: B-splines rescaled so each integrates to 1."""
    b = bspline_basis(knots, x)
    t = knots.full_knots()
    order = knots.degree + 1
    widths = t[order : order + knots.size] - t[: knots.size]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(widths > 0, order * b / widths, 0.0)
    return out


def ispline_basis(knots: KnotVector, p: float) -> np.ndarray:
    """I-spline values at ``p``: running integrals of the M-spline basis.

    Each element is nondecreasing from 0 at ``knots.lower`` to 1 at
    ``knots.upper``.  The integral is taken span by span with Gauss-Legendre
    nodes, which is exact for the piecewise-polynomial integrand.
    """
    p = float(p)
    if not knots.lower < p < knots.upper:
        raise DomainError(f"I-spline argument must lie in ({knots.lower}, {knots.upper}), got {p}")
    nodes, weights = np.polynomial.legendre.leggauss(knots.degree + 1)
    breaks = np.unique(knots.full_knots())
    out = np.zeros(knots.size)
    for a, b in zip(breaks[:-1], breaks[1:]):
        hi = min(b, p)
        if hi <= a:
            break
        mid, half = 0.5 * (a + hi), 0.5 * (hi - a)
        for xn, wn in zip(nodes, weights):
            out += half * wn * mspline_basis(knots, mid + half * xn)
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Factor spline spec (weight-function basis over one factor)
# ---------------------------------------------------------------------------

CLAMP = "clamp"
LINEAR = "linear_nonnegative"


@dataclass(frozen=True)
class FactorSplineSpec:
    """Nonnegative B-spline basis over one factor.

    ``clamp`` extrapolation evaluates out-of-domain points at the nearest
    boundary, which keeps the basis nonnegative unconditionally.
    ``linear_nonnegative`` extends each element linearly using its boundary
    derivative; it preserves nonnegativity only when the boundary derivatives
    are themselves nonnegative, which is the caller's responsibility.
    """

    knots: KnotVector
    extrapolation: str = CLAMP

    def __post_init__(self):
        if self.extrapolation not in (CLAMP, LINEAR):
            raise ConfigurationError(f"unknown extrapolation policy {self.extrapolation!r}")

    @property
    def size(self) -> int:
        return self.knots.size

    def evaluate(self, x: float) -> np.ndarray:
        kv = self.knots
        x = float(x)
        if kv.lower <= x <= kv.upper:
            return bspline_basis(kv, x)
        if self.extrapolation == CLAMP:
            return bspline_basis(kv, min(max(x, kv.lower), kv.upper))
        edge = kv.lower if x < kv.lower else kv.upper
        return bspline_basis(kv, edge) + bspline_basis_derivative(kv, edge) * (x - edge)


def eval_bspline_basis(spec: FactorSplineSpec, x: float) -> np.ndarray:
    """Basis vector of ``spec`` at ``x``, honoring the extrapolation policy."""
    return spec.evaluate(x)


# ---------------------------------------------------------------------------
# Quantile and CVaR basis functions of the confidence level
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BasisFunction:
    """One basis function of the confidence level, identified by ``kind``.

    Quantile kinds are nondecreasing on (0,1); CVaR kinds are nondecreasing
    on [0,1) and dominate the matching quantile function.
    """

    kind: str
    p0: float = 0.0
    knots: KnotVector | None = None
    index: int = 0
    _ALL = QUANTILE_KINDS + CVAR_KINDS

    def __post_init__(self):
        if self.kind not in self._ALL:
            raise ConfigurationError(f"unknown basis kind {self.kind!r}")
        if self.kind == "ispline":
            if self.knots is None:
                raise ConfigurationError("ispline basis requires a knot vector")
            if not (self.knots.lower == 0.0 and self.knots.upper == 1.0):
                raise ConfigurationError("ispline basis knots must span [0, 1]")
            if not 0 <= self.index < self.knots.size:
                raise ConfigurationError(
                    f"ispline index {self.index} outside 0..{self.knots.size - 1}"
                )
        if self.kind in ("exp_right", "exp_left") and not 0.0 <= self.p0 < 1.0:
            raise ConfigurationError(f"truncation threshold must lie in [0, 1), got {self.p0}")

    # -- constructors ------------------------------------------------------
    @classmethod
    def constant(cls):
        return cls("constant")

    @classmethod
    def normal(cls):
        return cls("normal")

    @classmethod
    def logistic(cls):
        return cls("logistic")

    @classmethod
    def exp_right(cls, p0=0.75):
        return cls("exp_right", p0=p0)

    @classmethod
    def exp_left(cls, p0=0.25):
        return cls("exp_left", p0=p0)

    @classmethod
    def ispline(cls, knots: KnotVector, index: int):
        return cls("ispline", knots=knots, index=index)

    @classmethod
    def ispline_family(cls, n_interior: int, degree: int = 3) -> list["BasisFunction"]:
        kv = equidistant_knots(0.0, 1.0, n_interior, degree)
        return [cls.ispline(kv, i) for i in range(kv.size)]

    @classmethod
    def normal_cvar(cls):
        return cls("normal_cvar")

    @classmethod
    def logistic_cvar(cls):
        return cls("logistic_cvar")

    @classmethod
    def exponential_cvar(cls):
        return cls("exponential_cvar")


def _check_open_unit(p):
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise DomainError("confidence level must lie strictly inside (0, 1)")
    return p


def eval_quantile_basis(fn: BasisFunction, p):
    """Evaluate a quantile basis function at confidence level(s) ``p`` in (0,1)."""
    if fn.kind not in QUANTILE_KINDS:
        raise ConfigurationError(f"{fn.kind!r} is not a quantile basis kind")
    p = _check_open_unit(p)
    if fn.kind == "constant":
        out = np.ones_like(p)
    elif fn.kind == "normal":
        out = np.sqrt(2.0) * special.erfinv(2.0 * p - 1.0)
    elif fn.kind == "logistic":
        out = np.log(p / (1.0 - p))
    elif fn.kind == "exp_right":
        with np.errstate(divide="ignore"):
            out = np.where(p > fn.p0, -np.log((1.0 - p) / (1.0 - fn.p0)), 0.0)
    elif fn.kind == "exp_left":
        with np.errstate(divide="ignore"):
            out = np.where(p < fn.p0, np.log(p / fn.p0), 0.0) if fn.p0 > 0 else np.zeros_like(p)
    else:  # ispline
        flat = np.atleast_1d(p)
        vals = np.array([ispline_basis(fn.knots, pi)[fn.index] for pi in flat])
        out = vals.reshape(np.shape(p))
    return out if out.ndim else float(out)


def eval_cvar_basis(fn: BasisFunction, p):
    """Evaluate a CVaR basis function at confidence level(s) ``p`` in [0,1).

    At ``p = 0`` the value is the mean of the matching distribution.
    """
    if fn.kind not in CVAR_KINDS:
        raise ConfigurationError(f"{fn.kind!r} is not a CVaR basis kind")
    p = np.asarray(p, dtype=float)
    if np.any(p < 0.0) or np.any(p >= 1.0):
        raise DomainError("CVaR level must lie in [0, 1)")
    if fn.kind == "constant":
        out = np.ones_like(p)
    elif fn.kind == "normal_cvar":
        z = special.ndtri(np.where(p > 0.0, p, 0.5))
        dens = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
        out = np.where(p > 0.0, dens / (1.0 - p), 0.0)
    elif fn.kind == "logistic_cvar":
        entropy = -special.xlogy(p, p) - special.xlogy(1.0 - p, 1.0 - p)
        out = entropy / (1.0 - p)
    elif fn.kind == "exponential_cvar":
        out = 1.0 - np.log(1.0 - p)
    else:  # ispline
        flat = np.atleast_1d(p)
        vals = np.empty(flat.shape)
        for i, pi in enumerate(flat):
            vals[i] = 0.0 if pi <= 0.0 else ispline_basis(fn.knots, pi)[fn.index]
        out = vals.reshape(np.shape(p))
    return out if out.ndim else float(out)


def eval_basis(fn: BasisFunction, p, mode: str = "quantile"):
    """Dispatch to the quantile or CVaR evaluator according to ``mode``."""
    if mode == "quantile":
        return eval_quantile_basis(fn, p)
    if mode == "cvar":
        return eval_cvar_basis(fn, p)
    raise ConfigurationError(f"unknown model mode {mode!r}")
