"""Spline-weighted mixture models of quantile and CVaR functions.

A model maps a confidence level ``p`` and a factor vector ``x`` to

    G(p, x, a) = sum_ij a[i, j] * B_j(x) * Q_i(p)

where ``Q_0 = 1``, ``B_0 = 1`` and the remaining ``B_j`` form the tensor
product of per-factor spline bases.  With nondecreasing ``Q_i``, nonnegative
``B_j`` and ``a[i, j] >= 0`` for ``i >= 1``, curves at different confidence
levels never cross.  The same layout serves CVaR mixtures by swapping the
basis evaluator.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .bases import (
    CVAR_KINDS,
    QUANTILE_KINDS,
    BasisFunction,
    FactorSplineSpec,
    eval_basis,
    eval_bspline_basis,
    equidistant_knots,
    quantile_knots,
)
from .exceptions import ConfigurationError

QUANTILE_MODE = "quantile"
CVAR_MODE = "cvar"


@dataclass(frozen=True)
class ModelSpec:
    """Model structure: level bases, per-factor spline bases, and mode.

    The first level basis must be the constant function; the others must be
    pairwise distinct.  All level bases share one tensor-product spline
    basis, so the coefficient matrix has ``1 + prod(L_k)`` columns whose
    first column multiplies the constant weight.
    """

    quantile_bases: tuple[BasisFunction, ...]
    factor_specs: tuple[FactorSplineSpec, ...]
    mode: str = QUANTILE_MODE

    def __post_init__(self):
        object.__setattr__(self, "quantile_bases", tuple(self.quantile_bases))
        object.__setattr__(self, "factor_specs", tuple(self.factor_specs))
        if self.mode not in (QUANTILE_MODE, CVAR_MODE):
            raise ConfigurationError(f"unknown model mode {self.mode!r}")
        if not self.quantile_bases or self.quantile_bases[0].kind != "constant":
            raise ConfigurationError("the first level basis must be the constant function")
        if len(set(self.quantile_bases[1:])) != len(self.quantile_bases) - 1:
            raise ConfigurationError("level basis functions must be pairwise distinct")
        allowed = QUANTILE_KINDS if self.mode == QUANTILE_MODE else CVAR_KINDS
        for fn in self.quantile_bases:
            if fn.kind not in allowed:
                raise ConfigurationError(f"basis kind {fn.kind!r} invalid in {self.mode} mode")
        if not self.factor_specs:
            raise ConfigurationError("at least one factor spline is required")

    @property
    def n_level_bases(self) -> int:
        """I + 1, counting the constant."""
        return len(self.quantile_bases)

    @property
    def n_weight_bases(self) -> int:
        """J + 1 = 1 + prod_k L_k, counting the constant column."""
        prod = 1
        for fs in self.factor_specs:
            prod *= fs.size
        return 1 + prod

    @property
    def n_factors(self) -> int:
        return len(self.factor_specs)

    @property
    def spline_shape(self) -> tuple[int, ...]:
        return tuple(fs.size for fs in self.factor_specs)

    def param_shape(self) -> tuple[int, int]:
        return (self.n_level_bases, self.n_weight_bases)


def level_vector(spec: ModelSpec, p) -> np.ndarray:
    """Values of every level basis at ``p``; shape ``(I+1,)`` or ``(len(p), I+1)``."""
    cols = [np.asarray(eval_basis(fn, p, spec.mode), dtype=float) for fn in spec.quantile_bases]
    if np.ndim(p) == 0:
        return np.array(cols)
    return np.column_stack(cols)


def factor_weight_vector(factor_specs, x) -> np.ndarray:
    """Weight basis vector B(x) for the given factor splines: leading 1, then
    the row-major tensor product of per-factor bases in declaration order."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (len(factor_specs),):
        raise ConfigurationError(
            f"factor vector has length {x.shape[0]}, expected {len(factor_specs)}"
        )
    per_factor = [eval_bspline_basis(fs, xi) for fs, xi in zip(factor_specs, x)]
    tensor = reduce(np.kron, per_factor)
    return np.concatenate([[1.0], tensor])


def factor_weight_matrix(factor_specs, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.vstack([factor_weight_vector(factor_specs, row) for row in X])


def weight_vector(spec: ModelSpec, x) -> np.ndarray:
    """Weight basis vector B(x), length J+1 with leading 1."""
    return factor_weight_vector(spec.factor_specs, x)


def weight_matrix(spec: ModelSpec, X) -> np.ndarray:
    """Stacked weight vectors for observations ``X`` of shape (N, K)."""
    return factor_weight_matrix(spec.factor_specs, X)


def validate_params(spec: ModelSpec, params: np.ndarray, check_sign: bool = False,
                    tol: float = 0.0) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.shape != spec.param_shape():
        raise ConfigurationError(
            f"parameter matrix shape {params.shape} does not match spec {spec.param_shape()}"
        )
    if check_sign and params.shape[0] > 1 and params[1:].min(initial=0.0) < -tol:
        raise ConfigurationError("coefficients attached to non-constant level bases must be >= 0")
    return params


def eval_model(spec: ModelSpec, params: np.ndarray, p: float, x) -> float:
    """G(p, x, a) for a dense coefficient matrix."""
    params = validate_params(spec, params)
    qv = level_vector(spec, p)
    bv = weight_vector(spec, x)
    return float(qv @ params @ bv)


def sample_response(spec: ModelSpec, params: np.ndarray, x, u: float) -> float:
    """Inverse-transform sample: the model evaluated at a uniform draw ``u``."""
    return eval_model(spec, params, u, x)


# ---------------------------------------------------------------------------
# Low-rank representation of the coefficient tensor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LowRankParams:
    """Rank-R nonnegative factorization of the coefficient tensor.

    ``factors[0]`` has shape (I+1, R); ``factors[k]`` has shape (L_k, R) for
    each factor axis.  The represented tensor is the sum over columns r of
    the outer products of the r-th columns.  ``shift`` is the constant that
    was added to the responses before fitting; evaluation subtracts it.
    """

    factors: tuple[np.ndarray, ...]
    shift: float = 0.0

    def __post_init__(self):
        mats = tuple(np.asarray(u, dtype=float) for u in self.factors)
        object.__setattr__(self, "factors", mats)
        if not mats:
            raise ConfigurationError("low-rank parameters need at least one factor matrix")
        ranks = {u.shape[1] for u in mats}
        if len(ranks) != 1:
            raise ConfigurationError(f"factor matrices disagree on rank: {sorted(ranks)}")
        if self.rank < 1:
            raise ConfigurationError("rank must be at least 1")
        for k, u in enumerate(mats):
            if u.ndim != 2:
                raise ConfigurationError(f"factor matrix {k} is not two-dimensional")
            if u.min(initial=0.0) < 0.0:
                raise ConfigurationError(f"factor matrix {k} has negative entries")

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    def tensor_shape(self) -> tuple[int, ...]:
        return tuple(u.shape[0] for u in self.factors)


def materialize_tensor(lr: LowRankParams) -> np.ndarray:
    """Dense coefficient tensor: sum of rank-one outer products."""
    shape = lr.tensor_shape()
    out = np.zeros(shape)
    for r in range(lr.rank):
        out += reduce(np.multiply.outer, [u[:, r] for u in lr.factors])
    return out


def eval_lowrank(spec: ModelSpec, lr: LowRankParams, p: float, x) -> float:
    """G(p, x) for low-rank parameters, evaluated factor by factor."""
    _check_lowrank_shape(spec, lr)
    qv = level_vector(spec, p)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    acc = qv @ lr.factors[0]
    for fs, xi, u in zip(spec.factor_specs, x, lr.factors[1:]):
        acc = acc * (eval_bspline_basis(fs, xi) @ u)
    return float(acc.sum()) - lr.shift


def eval_dense_tensor(spec: ModelSpec, tensor: np.ndarray, p: float, x, shift: float = 0.0) -> float:
    """Contract a dense coefficient tensor against the rank-one basis tensor."""
    expected = (spec.n_level_bases,) + spec.spline_shape
    tensor = np.asarray(tensor, dtype=float)
    if tensor.shape != expected:
        raise ConfigurationError(f"tensor shape {tensor.shape} does not match spec {expected}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    acc = np.tensordot(level_vector(spec, p), tensor, axes=(0, 0))
    for fs, xi in zip(spec.factor_specs, x):
        acc = np.tensordot(eval_bspline_basis(fs, xi), acc, axes=(0, 0))
    return float(acc) - shift


def _check_lowrank_shape(spec: ModelSpec, lr: LowRankParams):
    expected = (spec.n_level_bases,) + spec.spline_shape
    if lr.tensor_shape() != expected:
        raise ConfigurationError(
            f"low-rank tensor shape {lr.tensor_shape()} does not match spec {expected}"
        )


def tensor_to_params(spec: ModelSpec, tensor: np.ndarray, shift: float = 0.0) -> np.ndarray:
    """Embed a coefficient tensor into the dense matrix layout.

    The constant column is set from ``shift`` so that dense evaluation
    reproduces tensor evaluation exactly.
    """
    tensor = np.asarray(tensor, dtype=float)
    I1 = spec.n_level_bases
    params = np.zeros(spec.param_shape())
    params[:, 1:] = tensor.reshape(I1, -1)
    params[0, 0] = -shift
    return params


# ---------------------------------------------------------------------------
# Batch prediction and surfaces
# ---------------------------------------------------------------------------


def predict_levels(spec: ModelSpec, params, X, levels) -> np.ndarray:
    """Model values at each observation and confidence level, shape (N, M).

    ``params`` may be a dense matrix or :class:`LowRankParams`.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    qmat = level_vector(spec, levels)  # (M, I+1)
    if isinstance(params, LowRankParams):
        _check_lowrank_shape(spec, params)
        wprod = np.ones((X.shape[0], params.rank))
        for k, fs in enumerate(spec.factor_specs):
            bmat = np.vstack([eval_bspline_basis(fs, xi) for xi in X[:, k]])
            wprod *= bmat @ params.factors[k + 1]
        return wprod @ (qmat @ params.factors[0]).T - params.shift
    params = validate_params(spec, params)
    bmat = weight_matrix(spec, X)
    return (bmat @ params.T) @ qmat.T


def conditional_quantile_fn(spec: ModelSpec, params, x):
    """The conditional quantile (or CVaR) function at fixed ``x``, callable in p."""

    def fn(p):
        out = predict_levels(spec, params, np.atleast_2d(np.asarray(x, dtype=float)), p)[0]
        return out if np.ndim(p) else float(out[0])

    return fn


def surface_grid(spec: ModelSpec, params, p: float, x_grids) -> np.ndarray:
    """Level-``p`` model surface over a factor grid.

    ``x_grids`` holds one 1-D array per factor; rows iterate row-major over
    the Cartesian product (last factor fastest).  Returns an array with K
    factor columns followed by the model value.
    """
    grids = [np.atleast_1d(np.asarray(g, dtype=float)) for g in x_grids]
    if len(grids) != spec.n_factors:
        raise ConfigurationError(f"expected {spec.n_factors} factor grids, got {len(grids)}")
    if any(g.size == 0 for g in grids):
        raise ConfigurationError("factor grids must be nonempty")
    points = np.array(list(itertools.product(*grids)))
    values = predict_levels(spec, params, points, [p])[:, 0]
    return np.column_stack([points, values])


# ---------------------------------------------------------------------------
# Declarative model configuration (data-independent part of a spec)
# ---------------------------------------------------------------------------

EQUIDISTANT = "equidistant"
QUANTILE_PLACEMENT = "quantile"


@dataclass(frozen=True)
class ModelConfig:
    """Recipe for building a :class:`ModelSpec` once factor data is known.

    Level bases are data independent; factor-spline knots are placed over
    the observed factor range at build time.
    """

    quantile_bases: tuple[BasisFunction, ...]
    spline_degree: int = 3
    spline_interior_knots: int = 6
    placement: str = EQUIDISTANT
    extrapolation: str = "clamp"
    mode: str = QUANTILE_MODE

    def __post_init__(self):
        object.__setattr__(self, "quantile_bases", tuple(self.quantile_bases))
        if self.placement not in (EQUIDISTANT, QUANTILE_PLACEMENT):
            raise ConfigurationError(f"unknown knot placement {self.placement!r}")

    def build(self, X) -> ModelSpec:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        specs = []
        for k in range(X.shape[1]):
            col = X[:, k]
            lo, hi = float(col.min()), float(col.max())
            if not lo < hi:
                raise ConfigurationError(f"factor column {k} is constant; cannot place knots")
            if self.placement == EQUIDISTANT:
                kv = equidistant_knots(lo, hi, self.spline_interior_knots, self.spline_degree)
            else:
                kv = quantile_knots(col, self.spline_interior_knots, self.spline_degree)
            specs.append(FactorSplineSpec(kv, self.extrapolation))
        return ModelSpec(self.quantile_bases, tuple(specs), self.mode)
