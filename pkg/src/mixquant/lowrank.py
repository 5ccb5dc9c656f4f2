"""Alternating block-convex fitting of the low-rank coefficient tensor.

Each step fixes all factor matrices but one and solves the resulting convex
weighted-error problem under nonnegativity, so the objective never increases.
Because every entry of the tensor is sign constrained, a constant shift
(worst negative response plus one interquartile range) is added to the
responses before fitting and recorded on the result; evaluation subtracts it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .bases import eval_bspline_basis
from .calibrate import (
    CalibrationConfig,
    column_difference_matrix,
    penalty_value,
    solve_weighted_program,
    weighted_error,
)
from .data import Dataset
from .exceptions import ConfigurationError, SolverError
from .model import LowRankParams, ModelSpec, level_vector, materialize_tensor

RANDOM_INIT = "random"
ONES_INIT = "ones"


@dataclass(frozen=True)
class ALSConfig:
    """Rank, stopping rule, and inner calibration settings."""

    rank: int
    inner: CalibrationConfig
    epsilon: float = 1e-6
    max_sweeps: int = 50
    init: str = RANDOM_INIT
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ConfigurationError("rank must be at least 1")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")
        if self.max_sweeps < 1:
            raise ConfigurationError("max_sweeps must be at least 1")
        if self.init not in (RANDOM_INIT, ONES_INIT):
            raise ConfigurationError(f"unknown init policy {self.init!r}")


@dataclass
class ALSTrace:
    """Objective after every block update plus per-sweep tensor movement."""

    initial_objective: float
    objectives: list[float] = field(default_factory=list)
    blocks: list[tuple[int, int]] = field(default_factory=list)  # (sweep, block k)
    frob_changes: list[float] = field(default_factory=list)
    stopped_on: str = "max_sweeps"

    def rows(self, rank=None):
        """Flat (rank, step, block, objective) rows for CSV emission."""
        out = []
        for step, ((sweep, k), obj) in enumerate(zip(self.blocks, self.objectives), start=1):
            row = (step, k, obj) if rank is None else (rank, step, k, obj)
            out.append(row)
        return out


def compute_shift(y) -> float:
    """max(0, -min y) plus one interquartile range."""
    y = np.asarray(y, dtype=float)
    q25, q75 = np.quantile(y, [0.25, 0.75], method="linear")
    return float(max(0.0, -y.min()) + (q75 - q25))


def _init_factors(shape_dims, rank, policy, rng):
    if policy == ONES_INIT:
        return [np.ones((d, rank)) for d in shape_dims]
    return [rng.uniform(0.1, 1.0, size=(d, rank)) for d in shape_dims]


def _pad_factors(factors, rank, rng):
    """Embed a lower-rank solution into a higher rank.

    The level-basis factor gets zero columns, so the padded model is
    function-identical to the small one; the spline factors get random
    nonnegative columns that the first level-basis update may activate.
    """
    old_rank = factors[0].shape[1]
    if rank < old_rank:
        raise ConfigurationError(f"cannot nest rank {old_rank} into smaller rank {rank}")
    out = []
    for k, u in enumerate(factors):
        extra = (
            np.zeros((u.shape[0], rank - old_rank))
            if k == 0
            else rng.uniform(0.1, 1.0, size=(u.shape[0], rank - old_rank))
        )
        out.append(np.column_stack([u, extra]))
    return out


class _ALSState:
    """Mutable fitting state: factor matrices plus cached basis products."""

    def __init__(self, spec: ModelSpec, dataset: Dataset, config: ALSConfig, y_shifted):
        self.spec = spec
        self.config = config
        self.y = y_shifted
        self.Q = level_vector(spec, np.array(config.inner.levels))  # (M, I+1)
        self.Bk = [
            np.vstack([eval_bspline_basis(fs, xi) for xi in dataset.X[:, k]])
            for k, fs in enumerate(spec.factor_specs)
        ]
        self.factors: list[np.ndarray] = []

    @property
    def rank(self):
        return self.factors[0].shape[1]

    def level_products(self):
        return self.Q @ self.factors[0]  # (M, R)

    def spline_products(self, skip=None):
        prods = np.ones((self.Bk[0].shape[0], self.rank))
        for k, b in enumerate(self.Bk):
            if skip is not None and k == skip:
                continue
            prods *= b @ self.factors[k + 1]
        return prods

    def predictions(self):
        return self.spline_products() @ self.level_products().T  # (N, M)

    def block_designs(self, block: int):
        """Per-level design matrices for the coefficients of one block."""
        M = self.Q.shape[0]
        if block == 0:
            w = self.spline_products()  # (N, R)
            return [sp.csr_matrix(np.kron(self.Q[m : m + 1], w)) for m in range(M)]
        others = self.spline_products(skip=block - 1)  # (N, R)
        qprod = self.level_products()  # (M, R)
        b = self.Bk[block - 1]  # (N, L)
        designs = []
        for m in range(M):
            coef = others * qprod[m]  # (N, R)
            designs.append(sp.csr_matrix((b[:, :, None] * coef[:, None, :]).reshape(b.shape[0], -1)))
        return designs

    def penalty_matrix(self, block: int):
        pen = self.config.inner.penalty
        if not pen.active or block == 0:
            return None
        n_rows = self.factors[block].shape[0]
        return column_difference_matrix(n_rows, self.rank, pen.order)

    def total_penalty(self) -> float:
        pen = self.config.inner.penalty
        if not pen.active:
            return 0.0
        total = 0.0
        for k in range(1, len(self.factors)):
            mat = column_difference_matrix(self.factors[k].shape[0], self.rank, pen.order)
            total += penalty_value(pen, mat, self.factors[k].ravel())
        return total

    def objective(self) -> float:
        return weighted_error(self.y, self.predictions(), self.config.inner) + self.total_penalty()

    def update_block(self, block: int):
        designs = self.block_designs(block)
        pen_matrix = self.penalty_matrix(block)
        n_coef = designs[0].shape[1]
        coef, _, _ = solve_weighted_program(
            designs, self.y, self.config.inner, np.zeros(n_coef, dtype=bool), pen_matrix
        )
        coef = np.maximum(np.asarray(coef, dtype=float), 0.0)
        if not np.all(np.isfinite(coef)):
            raise SolverError(f"block {block} update produced non-finite factors")
        self.factors[block] = coef.reshape(self.factors[block].shape)

    def canonicalize(self):
        # push column scales of the spline factors into the level factor;
        # leaves the represented function unchanged
        for k in range(1, len(self.factors)):
            mx = self.factors[k].max(axis=0)
            pos = mx > 0
            self.factors[k][:, pos] /= mx[pos]
            self.factors[0][:, pos] *= mx[pos]


def als_calibrate(dataset: Dataset, spec: ModelSpec, config: ALSConfig,
                  init_from: LowRankParams | None = None,
                  exact_steps: int | None = None) -> tuple[LowRankParams, ALSTrace]:
    """Fit low-rank parameters by alternating convex block updates.

    Stops when the materialized tensor moves less than ``config.epsilon`` in
    Frobenius norm over a sweep, or after ``config.max_sweeps``.  When
    ``exact_steps`` is given, exactly that many block updates run and the
    movement rule is skipped (used for comparable step-budget traces).
    """
    if dataset.k != spec.n_factors:
        raise ConfigurationError(
            f"dataset has {dataset.k} factors but spec expects {spec.n_factors}"
        )
    dims = (spec.n_level_bases,) + spec.spline_shape
    if config.rank > int(np.prod(dims)):
        raise ConfigurationError(f"rank {config.rank} exceeds tensor size {int(np.prod(dims))}")

    shift = compute_shift(dataset.y)
    state = _ALSState(spec, dataset, config, dataset.y + shift)
    rng = np.random.default_rng(config.seed)
    if init_from is not None:
        if init_from.tensor_shape() != dims:
            raise ConfigurationError("warm-start factors do not match the spec shape")
        state.factors = _pad_factors([u.copy() for u in init_from.factors], config.rank, rng)
    else:
        state.factors = _init_factors(dims, config.rank, config.init, rng)

    trace = ALSTrace(initial_objective=state.objective())
    n_blocks = len(state.factors)
    prev_tensor = materialize_tensor(LowRankParams(tuple(state.factors)))
    steps_done = 0
    for sweep in range(1, config.max_sweeps + 1):
        for block in range(n_blocks):
            if exact_steps is not None and steps_done >= exact_steps:
                trace.stopped_on = "exact_steps"
                return _result(state, shift, trace)
            try:
                state.update_block(block)
            except SolverError as exc:
                raise SolverError(f"sweep {sweep}, block {block}: {exc}") from exc
            trace.objectives.append(state.objective())
            trace.blocks.append((sweep, block))
            steps_done += 1
        state.canonicalize()
        tensor = materialize_tensor(LowRankParams(tuple(state.factors)))
        change = float(np.linalg.norm(tensor - prev_tensor))
        trace.frob_changes.append(change)
        prev_tensor = tensor
        if exact_steps is None and change <= config.epsilon:
            trace.stopped_on = "epsilon"
            return _result(state, shift, trace)
        if exact_steps is not None and steps_done >= exact_steps:
            trace.stopped_on = "exact_steps"
            return _result(state, shift, trace)
    trace.stopped_on = "max_sweeps"
    return _result(state, shift, trace)


def _result(state: _ALSState, shift: float, trace: ALSTrace):
    params = LowRankParams(tuple(u.copy() for u in state.factors), shift=shift)
    return params, trace


def rank_sweep(dataset: Dataset, spec: ModelSpec, ranks, steps: int,
               inner: CalibrationConfig, seed: int = 0, nested: bool = True,
               init: str = RANDOM_INIT):
    """Run a fixed block-step budget for each rank; returns [(rank, params, trace)].

    With ``nested=True`` ranks run in increasing order and each starts from
    the previous solution padded to the larger rank, which makes the final
    objectives nonincreasing in rank.
    """
    ranks = sorted(int(r) for r in ranks)
    if not ranks:
        raise ConfigurationError("ranks must be nonempty")
    if steps < 1:
        raise ConfigurationError("steps must be at least 1")
    results = []
    prev_params = None
    for rank in ranks:
        config = ALSConfig(rank=rank, inner=inner, max_sweeps=steps, init=init, seed=seed)
        warm = prev_params if nested else None
        params, trace = als_calibrate(dataset, spec, config, init_from=warm, exact_steps=steps)
        results.append((rank, params, trace))
        prev_params = params
    return results


def sweep_rows(results):
    """Flatten rank_sweep output into (rank, step, block, objective) rows."""
    rows = []
    for rank, _, trace in results:
        rows.extend(trace.rows(rank=rank))
    return rows
