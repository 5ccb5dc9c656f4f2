"""Convex calibration: weighted multi-level error minimization with constraints.

The pinball objective with no penalty or an absolute-difference penalty is a
linear program solved with HiGHS via scipy; a squared-difference penalty
makes it a quadratic program handed to cvxpy/Clarabel.  The superquantile
error is handled through its epigraph formulation over a beta grid, which is
again linear.  The route is an implementation detail: every solve is checked
by recomputing the objective independently from the fitted coefficients.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import linalg as sla
from scipy.optimize import linprog

from . import quadrangle as quad
from .data import Dataset
from .exceptions import ConfigurationError, DataError, SolverError
from .model import ModelSpec, factor_weight_matrix, validate_params, weight_matrix, level_vector

# Default calibration grid: heavy tails, as used for the inflation experiment.
DEFAULT_LEVELS = (0.01, 0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95, 0.99)
DEFAULT_WEIGHTS = (20.0, 10.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 10.0, 20.0)

PINBALL = "pinball"
SUPERQUANTILE = "superquantile"


@dataclass(frozen=True)
class PenaltySpec:
    """Roughness penalty on differences of adjacent spline coefficients."""

    kind: str = "none"  # none | squared_diff | abs_diff
    order: int = 1
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "squared_diff", "abs_diff"):
            raise ConfigurationError(f"unknown penalty kind {self.kind!r}")
        if self.order not in (1, 2):
            raise ConfigurationError(f"penalty order must be 1 or 2, got {self.order}")
        if self.lam < 0:
            raise ConfigurationError("penalty weight must be nonnegative")

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def squared_diff(cls, lam, order=1):
        return cls("squared_diff", order, lam)

    @classmethod
    def abs_diff(cls, lam, order=1):
        return cls("abs_diff", order, lam)

    @property
    def active(self) -> bool:
        return self.kind != "none" and self.lam > 0.0


@dataclass(frozen=True)
class CalibrationConfig:
    """Confidence-level grid, weights, penalty, error kind, and solver knobs."""

    levels: tuple[float, ...] = DEFAULT_LEVELS
    weights: tuple[float, ...] = ()
    penalty: PenaltySpec = field(default_factory=PenaltySpec.none)
    nonneg: bool = True
    error: str = PINBALL
    beta_grid_size: int = 50
    beta_max: float = quad.DEFAULT_BETA_MAX
    tolerance_gap: float = 1e-8
    max_iterations: int = 200_000
    method: str = "highs"
    seed: int = 0

    def __post_init__(self):
        levels = tuple(float(p) for p in self.levels)
        if not levels:
            raise ConfigurationError("at least one confidence level is required")
        if any(not 0.0 < p < 1.0 for p in levels):
            raise ConfigurationError("confidence levels must lie in (0, 1)")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigurationError("confidence levels must be strictly increasing")
        weights = self.weights
        if not weights:
            weights = _default_weights_for(levels)
        weights = np.asarray(weights, dtype=float)
        if weights.size != len(levels):
            raise ConfigurationError("weights and levels differ in length")
        if np.any(weights < 0):
            raise ConfigurationError("weights must be nonnegative")
        total = weights.sum()
        if total <= 0:
            raise ConfigurationError("weights must not all be zero")
        weights = weights / total
        if abs(weights.sum() - 1.0) > 1e-12:
            weights = weights / weights.sum()
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "weights", tuple(float(w) for w in weights))
        if self.error not in (PINBALL, SUPERQUANTILE):
            raise ConfigurationError(f"unknown error kind {self.error!r}")
        if self.beta_grid_size < 2:
            raise ConfigurationError("beta grid needs at least 2 points")

    def error_kind(self, p: float) -> quad.ErrorKind:
        if self.error == PINBALL:
            return quad.ErrorKind.pinball(p)
        return quad.ErrorKind.superquantile(p, self.beta_grid_size, self.beta_max)


def _default_weights_for(levels) -> tuple[float, ...]:
    if tuple(levels) == DEFAULT_LEVELS:
        return DEFAULT_WEIGHTS
    return tuple(1.0 for _ in levels)


@dataclass(frozen=True)
class DesignCache:
    """Per-observation weight vectors and the level-basis matrix.

    ``B`` has one row per observation (leading entry 1); ``Q[m, i]`` holds
    the i-th level basis evaluated at the m-th confidence level (first
    column all ones).
    """

    B: np.ndarray
    Q: np.ndarray
    levels: tuple[float, ...]

    def predictions(self, params: np.ndarray) -> np.ndarray:
        """Model values, shape (N, M)."""
        return (self.B @ params.T) @ self.Q.T


def assemble_design(dataset: Dataset, spec: ModelSpec, levels) -> DesignCache:
    """Evaluate the weight and level bases once for a calibration run."""
    if dataset.k != spec.n_factors:
        raise ConfigurationError(
            f"dataset has {dataset.k} factors but spec expects {spec.n_factors}"
        )
    levels = tuple(float(p) for p in levels)
    B = weight_matrix(spec, dataset.X)
    Q = level_vector(spec, np.array(levels))
    return DesignCache(B, Q, levels)


# ---------------------------------------------------------------------------
# Difference-penalty matrices
# ---------------------------------------------------------------------------

_DIFF_COEFS = {1: (-1.0, 1.0), 2: (1.0, -2.0, 1.0)}


def difference_matrix(spline_shape, n_level_bases, order) -> sp.csr_matrix:
    """Rows of d-th differences of spline coefficients, per level-basis row
    and per factor axis, within the dense (I+1) x (J+1) layout.

    The constant column takes no part in the penalty.
    """
    coefs = _DIFF_COEFS[order]
    shape = tuple(spline_shape)
    n_spline = int(np.prod(shape))
    n_cols = n_level_bases * (1 + n_spline)
    idx = np.arange(n_spline).reshape(shape)
    blocks_r, blocks_c, blocks_v = [], [], []
    row0 = 0
    for i in range(n_level_bases):
        offset = i * (1 + n_spline) + 1
        for axis, ln in enumerate(shape):
            if ln <= order:
                continue
            n_pos = ln - order
            base = np.moveaxis(idx, axis, 0)[:n_pos].ravel()
            stride = np.moveaxis(idx, axis, 0)[1].ravel()[0] - np.moveaxis(idx, axis, 0)[0].ravel()[0]
            n_rows = base.size
            rows = np.arange(row0, row0 + n_rows)
            for t, cv in enumerate(coefs):
                blocks_r.append(rows)
                blocks_c.append(offset + base + t * stride)
                blocks_v.append(np.full(n_rows, cv))
            row0 += n_rows
    if row0 == 0:
        return sp.csr_matrix((0, n_cols))
    r = np.concatenate(blocks_r)
    c = np.concatenate(blocks_c)
    v = np.concatenate(blocks_v)
    return sp.csr_matrix((v, (r, c)), shape=(row0, n_cols))


def column_difference_matrix(n_rows, rank, order) -> sp.csr_matrix:
    """Differences down each column of an (n_rows x rank) block, row-major vec."""
    coefs = _DIFF_COEFS[order]
    if n_rows <= order:
        return sp.csr_matrix((0, n_rows * rank))
    n_pos = n_rows - order
    rows = np.arange(n_pos * rank)
    l_idx, r_idx = np.divmod(np.arange(n_pos * rank), rank)
    blocks_r, blocks_c, blocks_v = [], [], []
    for t, cv in enumerate(coefs):
        blocks_r.append(rows)
        blocks_c.append((l_idx + t) * rank + r_idx)
        blocks_v.append(np.full(rows.size, cv))
    return sp.csr_matrix(
        (np.concatenate(blocks_v), (np.concatenate(blocks_r), np.concatenate(blocks_c))),
        shape=(n_pos * rank, n_rows * rank),
    )


def penalty_value(penalty: PenaltySpec, pen_matrix, coef_vec) -> float:
    if pen_matrix is None or not penalty.active or pen_matrix.shape[0] == 0:
        return 0.0
    d = pen_matrix @ coef_vec
    if penalty.kind == "squared_diff":
        return float(penalty.lam * np.dot(d, d))
    return float(penalty.lam * np.abs(d).sum())


# ---------------------------------------------------------------------------
# Solve report and independent objective evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolveReport:
    objective: float
    solver_objective: float
    gap: float
    iterations: int
    status: str
    method: str
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "solver_objective": self.solver_objective,
            "gap": self.gap,
            "iterations": self.iterations,
            "status": self.status,
            "method": self.method,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class FitResult:
    params: np.ndarray
    report: SolveReport


def weighted_error(y, preds, config: CalibrationConfig) -> float:
    """Sum over levels of weight times error of the residual sample."""
    y = np.asarray(y, dtype=float)
    total = 0.0
    for m, (p, w) in enumerate(zip(config.levels, config.weights)):
        total += w * quad.error_value(config.error_kind(p), y - preds[:, m])
    return total


def objective_value(cache: DesignCache, y, params, config: CalibrationConfig,
                    pen_matrix=None) -> float:
    """Calibration objective recomputed from scratch (errors + penalty)."""
    preds = cache.predictions(params)
    obj = weighted_error(y, preds, config)
    return obj + penalty_value(config.penalty, pen_matrix, np.asarray(params).ravel())


# ---------------------------------------------------------------------------
# LP / QP cores.  All take per-level design matrices D_m (N x P) such that
# the level-m prediction is D_m @ coef.
# ---------------------------------------------------------------------------


def _hstack_designs(designs):
    return sp.vstack([sp.csr_matrix(d) for d in designs], format="csr")


def _linprog_options(config: CalibrationConfig) -> dict:
    return {
        "presolve": True,
        "primal_feasibility_tolerance": 1e-10,
        "dual_feasibility_tolerance": 1e-9,
    }


def _run_linprog(c, A_eq, b_eq, A_ub, b_ub, bounds, config: CalibrationConfig):
    res = linprog(
        c,
        A_eq=A_eq,
        b_eq=b_eq,
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=bounds,
        method=config.method,
        options=_linprog_options(config),
    )
    if not res.success:
        raise SolverError(f"linear program failed: {res.message}")
    return res


def solve_pinball_program(designs, y, config: CalibrationConfig, free_mask, pen_matrix=None):
    """Minimize sum_m w_m * mean pinball_m + penalty over coefficients.

    ``free_mask[j]`` marks coefficients without a sign constraint.  Returns
    (coef, solver_objective, info dict).
    """
    y = np.asarray(y, dtype=float)
    M, N = len(designs), y.size
    P = designs[0].shape[1]
    levels, wts = config.levels, config.weights
    if config.penalty.kind == "squared_diff" and config.penalty.active:
        return _solve_pinball_qp(designs, y, config, free_mask, pen_matrix)

    wp = np.concatenate([np.full(N, w * p / N) for p, w in zip(levels, wts)])
    wn = np.concatenate([np.full(N, w * (1 - p) / N) for p, w in zip(levels, wts)])
    D = _hstack_designs(designs)
    eye = sp.identity(M * N, format="csr")
    blocks = [D, eye, -eye]
    c = np.concatenate([np.zeros(P), wp, wn])
    bounds = [(None, None) if f else (0, None) for f in free_mask]
    bounds += [(0, None)] * (2 * M * N)
    A_eq = sp.hstack(blocks, format="csr")
    b_eq = np.tile(y, M)
    if config.penalty.kind == "abs_diff" and config.penalty.active and pen_matrix.shape[0]:
        npen = pen_matrix.shape[0]
        pad = sp.csr_matrix((M * N, 2 * npen))
        A_eq = sp.hstack([A_eq, pad], format="csr")
        pen_eye = sp.identity(npen, format="csr")
        pen_rows = sp.hstack(
            [pen_matrix, sp.csr_matrix((npen, 2 * M * N)), -pen_eye, pen_eye], format="csr"
        )
        A_eq = sp.vstack([A_eq, pen_rows], format="csr")
        b_eq = np.concatenate([b_eq, np.zeros(npen)])
        c = np.concatenate([c, np.full(2 * npen, config.penalty.lam)])
        bounds += [(0, None)] * (2 * npen)
    res = _run_linprog(c, A_eq, b_eq, None, None, bounds, config)
    info = {"iterations": int(getattr(res, "nit", -1)), "status": res.message}
    return res.x[:P], float(res.fun), info


def _solve_pinball_qp(designs, y, config: CalibrationConfig, free_mask, pen_matrix):
    import cvxpy as cp

    M, N = len(designs), y.size
    P = designs[0].shape[1]
    D = _hstack_designs(designs)
    wp = np.concatenate([np.full(N, w * p / N) for p, w in zip(config.levels, config.weights)])
    wn = np.concatenate([np.full(N, w * (1 - p) / N) for p, w in zip(config.levels, config.weights)])
    a = cp.Variable(P)
    u = cp.Variable(M * N, nonneg=True)
    v = cp.Variable(M * N, nonneg=True)
    cons = [D @ a + u - v == np.tile(y, M)]
    sign_idx = np.flatnonzero(~np.asarray(free_mask))
    if sign_idx.size:
        cons.append(a[sign_idx] >= 0)
    obj = wp @ u + wn @ v + config.penalty.lam * cp.sum_squares(pen_matrix @ a)
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise SolverError(f"quadratic program failed: status {prob.status}")
    info = {"iterations": -1, "status": prob.status}
    return np.asarray(a.value, dtype=float), float(prob.value), info


def solve_superquantile_program(designs, y, config: CalibrationConfig, free_mask,
                                pen_matrix=None):
    """Epigraph formulation of the superquantile error over the beta grid.

    Per level m and beta-grid node g, auxiliary scalars c and t >= 0 satisfy
    t >= c + mean[(z - c)_+] / (1 - beta); t then equals max{0, superquantile}
    at the optimum, and the integral is the midpoint sum of the t values.
    """
    y = np.asarray(y, dtype=float)
    M, N = len(designs), y.size
    P = designs[0].shape[1]
    G = config.beta_grid_size
    betas = (np.arange(G) + 0.5) * config.beta_max / G
    step = config.beta_max / G
    wts = np.asarray(config.weights)
    if config.penalty.kind == "squared_diff" and config.penalty.active:
        return _solve_superquantile_qp(designs, y, config, free_mask, pen_matrix)

    MG = M * G
    n_var = P + MG + MG + MG * N  # [a, c, t, s]
    c_obj = np.zeros(n_var)
    for m, (w, d) in enumerate(zip(wts, designs)):
        c_obj[:P] += (w / N) * np.asarray(d.sum(axis=0)).ravel()
    t_costs = np.concatenate([w * step / (1.0 - p) * np.ones(G) for w, p in zip(wts, config.levels)])
    c_obj[P + MG : P + 2 * MG] = t_costs

    # s_{m,g,n} >= y_n - (D_m a)_n - c_{m,g}
    D_rep = sp.vstack([sp.vstack([sp.csr_matrix(d)] * G) for d in designs], format="csr")
    ones_n = sp.csr_matrix(np.ones((N, 1)))
    c_sel = sp.kron(sp.identity(MG, format="csr"), ones_n, format="csr")
    s_eye = sp.identity(MG * N, format="csr")
    A1 = sp.hstack([-D_rep, -c_sel, sp.csr_matrix((MG * N, MG)), -s_eye], format="csr")
    b1 = np.tile(-y, MG)
    # c_{m,g} - t_{m,g} + sum_n s / ((1 - beta_g) N) <= 0
    coef = np.tile(1.0 / ((1.0 - betas) * N), M)
    s_sum = sp.kron(sp.diags(coef), sp.csr_matrix(np.ones((1, N))), format="csr")
    A2 = sp.hstack(
        [sp.csr_matrix((MG, P)), sp.identity(MG), -sp.identity(MG), s_sum], format="csr"
    )
    A_ub = sp.vstack([A1, A2], format="csr")
    b_ub = np.concatenate([b1, np.zeros(MG)])
    bounds = [(None, None) if f else (0, None) for f in free_mask]
    bounds += [(None, None)] * MG + [(0, None)] * MG + [(0, None)] * (MG * N)
    const = -float(wts.sum() * y.mean())
    if config.penalty.kind == "abs_diff" and config.penalty.active and pen_matrix.shape[0]:
        npen = pen_matrix.shape[0]
        A_ub = sp.hstack([A_ub, sp.csr_matrix((A_ub.shape[0], 2 * npen))], format="csr")
        pen_eye = sp.identity(npen, format="csr")
        A_eq = sp.hstack(
            [pen_matrix, sp.csr_matrix((npen, 2 * MG + MG * N)), -pen_eye, pen_eye],
            format="csr",
        )
        b_eq = np.zeros(npen)
        c_obj = np.concatenate([c_obj, np.full(2 * npen, config.penalty.lam)])
        bounds += [(0, None)] * (2 * npen)
        res = _run_linprog(c_obj, A_eq, b_eq, A_ub, b_ub, bounds, config)
    else:
        res = _run_linprog(c_obj, None, None, A_ub, b_ub, bounds, config)
    info = {"iterations": int(getattr(res, "nit", -1)), "status": res.message}
    return res.x[:P], float(res.fun) + const, info


def _solve_superquantile_qp(designs, y, config: CalibrationConfig, free_mask, pen_matrix):
    import cvxpy as cp

    M, N = len(designs), y.size
    P = designs[0].shape[1]
    G = config.beta_grid_size
    betas = (np.arange(G) + 0.5) * config.beta_max / G
    step = config.beta_max / G
    a = cp.Variable(P)
    cons = []
    sign_idx = np.flatnonzero(~np.asarray(free_mask))
    if sign_idx.size:
        cons.append(a[sign_idx] >= 0)
    total = 0
    for m, (p, w) in enumerate(zip(config.levels, config.weights)):
        z = y - designs[m] @ a
        cvar = cp.Variable(G)
        t = cp.Variable(G, nonneg=True)
        for g in range(G):
            cons.append(
                t[g] >= cvar[g] + cp.sum(cp.pos(z - cvar[g])) / ((1.0 - betas[g]) * N)
            )
        total += w * (step * cp.sum(t) / (1.0 - p) - cp.sum(z) / N)
    total = total + config.penalty.lam * cp.sum_squares(pen_matrix @ a)
    prob = cp.Problem(cp.Minimize(total), cons)
    prob.solve(solver=cp.CLARABEL)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise SolverError(f"superquantile program failed: status {prob.status}")
    info = {"iterations": -1, "status": prob.status}
    return np.asarray(a.value, dtype=float), float(prob.value), info


def solve_weighted_program(designs, y, config: CalibrationConfig, free_mask, pen_matrix=None):
    """Dispatch on the configured error kind."""
    if config.error == PINBALL:
        return solve_pinball_program(designs, y, config, free_mask, pen_matrix)
    return solve_superquantile_program(designs, y, config, free_mask, pen_matrix)


# ---------------------------------------------------------------------------
# Public calibration entry points
# ---------------------------------------------------------------------------


def _level_designs(cache: DesignCache) -> list:
    B = sp.csr_matrix(cache.B)
    return [sp.kron(sp.csr_matrix(cache.Q[m : m + 1]), B, format="csr")
            for m in range(cache.Q.shape[0])]


def _free_mask(spec: ModelSpec, nonneg: bool) -> np.ndarray:
    I1, J1 = spec.param_shape()
    mask = np.ones(I1 * J1, dtype=bool)
    if nonneg:
        mask[J1:] = False
    return mask


def _collinearity_warnings(cache: DesignCache) -> list[str]:
    # the constant column is always dependent on the spline columns (they sum
    # to one), so only deficiency among the spline columns is reported
    out = []
    S = cache.B[:, 1:]
    n_spline = S.shape[1]
    if S.shape[0] < n_spline:
        out.append(f"fewer observations ({S.shape[0]}) than spline basis columns ({n_spline})")
    elif n_spline:
        rank = np.linalg.matrix_rank(S)
        if rank < n_spline:
            out.append(
                f"spline design columns are collinear (rank {rank} < {n_spline}); "
                "coefficients are not individually identified"
            )
    return out


def _finalize(spec, cache, y, coef, solver_obj, info, config, pen_matrix, extra_warnings=()):
    I1, J1 = spec.param_shape()
    params = np.asarray(coef, dtype=float).reshape(I1, J1)
    if config.nonneg and I1 > 1:
        params[1:] = np.maximum(params[1:], 0.0)
    obj = objective_value(cache, y, params, config, pen_matrix)
    quadratic = config.penalty.active and config.penalty.kind == "squared_diff"
    report = SolveReport(
        objective=obj,
        solver_objective=solver_obj,
        gap=abs(obj - solver_obj),
        iterations=info.get("iterations", -1),
        status=str(info.get("status", "")),
        method="clarabel" if quadratic else config.method,
        warnings=tuple(extra_warnings),
    )
    return FitResult(params=params, report=report)


def calibrate(dataset: Dataset, spec: ModelSpec, config: CalibrationConfig) -> FitResult:
    """Fit the coefficient matrix by weighted multi-level error minimization.

    Residual-split variables make the pinball problem a linear program whose
    optimum HiGHS certifies; the independently recomputed objective is stored
    in the report alongside the solver's value.
    """
    if spec.mode != "quantile" and config.error == PINBALL:
        warnings.warn("pinball calibration on a CVaR-mode spec estimates quantile mixtures")
    if not np.all(np.isfinite(dataset.y)):
        raise DataError("responses contain non-finite values")
    cache = assemble_design(dataset, spec, config.levels)
    warn = _collinearity_warnings(cache)
    designs = _level_designs(cache)
    pen_matrix = None
    if config.penalty.active:
        pen_matrix = difference_matrix(spec.spline_shape, spec.n_level_bases, config.penalty.order)
    coef, solver_obj, info = solve_weighted_program(
        designs, dataset.y, config, _free_mask(spec, config.nonneg), pen_matrix
    )
    return _finalize(spec, cache, dataset.y, coef, solver_obj, info, config, pen_matrix, warn)


def calibrate_cvar(dataset: Dataset, spec: ModelSpec, config: CalibrationConfig) -> FitResult:
    """Fit a CVaR-mixture model under the superquantile error."""
    if spec.mode != "cvar":
        raise ConfigurationError("calibrate_cvar requires a spec with mode='cvar'")
    if config.error != SUPERQUANTILE:
        config = dataclasses.replace(config, error=SUPERQUANTILE)
    return calibrate(dataset, spec, config)


def separate_qr(dataset: Dataset, factor_specs, p: float, method: str = "highs") -> np.ndarray:
    """Single-level spline quantile regression; returns the J+1 coefficients."""
    if not 0.0 < p < 1.0:
        raise ConfigurationError(f"confidence level must lie in (0, 1), got {p}")
    B = factor_weight_matrix(factor_specs, dataset.X)
    config = CalibrationConfig(levels=(p,), weights=(1.0,), method=method)
    designs = [sp.csr_matrix(B)]
    coef, _, _ = solve_pinball_program(
        designs, dataset.y, config, np.ones(B.shape[1], dtype=bool), None
    )
    return coef


def separate_qr_objective(dataset: Dataset, factor_specs, p: float, coef) -> float:
    """Mean pinball loss of the level-p regression at the given coefficients."""
    B = factor_weight_matrix(factor_specs, dataset.X)
    return float(np.mean(quad.pinball(p, dataset.y - B @ coef)))


# ---------------------------------------------------------------------------
# Constrained matrix system Q A = Lambda
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemSolution:
    params: np.ndarray
    l1_residual: float
    feasible: bool


def solve_constrained_system(Q, Lam, nonneg_rows: bool = True,
                             tol: float = 1e-8) -> SystemSolution:
    """Solve Q A = Lambda with optional nonnegativity on rows 1 onward.

    When the system has no constrained solution, the minimized l1 residual
    ``min ||Q A - Lambda||_1`` over the constraint set is returned as an
    infeasibility certificate together with its minimizer.
    """
    Q = np.asarray(Q, dtype=float)
    Lam = np.asarray(Lam, dtype=float)
    if Q.ndim != 2 or Lam.ndim != 2 or Q.shape[0] != Lam.shape[0]:
        raise ConfigurationError(
            f"incompatible shapes: Q {Q.shape}, Lambda {Lam.shape}"
        )
    M, I1 = Q.shape
    J1 = Lam.shape[1]
    if M < I1:
        raise ConfigurationError(f"need at least as many levels ({M}) as level bases ({I1})")
    _check_column_rank(Q)

    A0, *_ = np.linalg.lstsq(Q, Lam, rcond=None)
    residual = float(np.abs(Q @ A0 - Lam).sum())
    feasible_signs = I1 == 1 or not nonneg_rows or A0[1:].min(initial=0.0) >= -1e-10
    if residual <= tol and feasible_signs:
        if nonneg_rows and I1 > 1:
            A0[1:] = np.maximum(A0[1:], 0.0)
        return SystemSolution(A0, residual, True)

    # LP: min sum |Q A - Lam|, rows >= 0 where constrained
    nA = I1 * J1
    nE = M * J1
    c = np.concatenate([np.zeros(nA), np.ones(2 * nE)])
    kron_Q = sp.kron(sp.csr_matrix(Q), sp.identity(J1), format="csr")  # rows (m, j)
    eye = sp.identity(nE, format="csr")
    A_eq = sp.hstack([kron_Q, -eye, eye], format="csr")
    b_eq = Lam.ravel()
    bounds = []
    for i in range(I1):
        free = (i == 0) or not nonneg_rows
        bounds += [(None, None) if free else (0, None)] * J1
    bounds += [(0, None)] * (2 * nE)
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if not res.success:
        raise SolverError(f"feasibility program failed: {res.message}")
    A = res.x[:nA].reshape(I1, J1)
    if nonneg_rows and I1 > 1:
        A[1:] = np.maximum(A[1:], 0.0)
    l1 = float(res.fun)
    return SystemSolution(A, l1, l1 <= tol)


def _check_column_rank(Q):
    M, I1 = Q.shape
    _, R, piv = sla.qr(Q, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    thresh = max(M, I1) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int((diag > thresh).sum())
    if rank < I1:
        bad = sorted(int(j) for j in piv[rank:])
        raise ConfigurationError(
            f"level-basis matrix is rank deficient; dependent columns: {bad}"
        )
