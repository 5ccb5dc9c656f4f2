"""Regular measures of error on discrete residual samples, and their statistics.

Each error kind pairs with the statistic that minimizes it under translation:
pinball and the normalized Koenker-Bassett error with the quantile, the
superquantile error with the superquantile (CVaR), and the asymmetric squared
error with the expectile.  The expectile form is standard in the expectile
regression literature rather than derived here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, DomainError, SolverError

DEFAULT_BETA_GRID = 200
DEFAULT_BETA_MAX = 0.999

PINBALL = "pinball"
KB_NORMALIZED = "kb_normalized"
SUPERQUANTILE = "superquantile"
EXPECTILE = "expectile"


@dataclass(frozen=True)
class ErrorKind:
    """An error functional at confidence level ``p``.

    For the superquantile error, ``beta_grid_size`` midpoint nodes on
    ``(0, beta_max]`` discretize the inner integral; the bias is O(1/grid).
    """

    kind: str
    p: float
    beta_grid_size: int = DEFAULT_BETA_GRID
    beta_max: float = DEFAULT_BETA_MAX

    def __post_init__(self):
        if self.kind not in (PINBALL, KB_NORMALIZED, SUPERQUANTILE, EXPECTILE):
            raise DomainError(f"unknown error kind {self.kind!r}")
        if not 0.0 < self.p < 1.0:
            raise DomainError(f"confidence level must lie in (0, 1), got {self.p}")
        if self.beta_grid_size < 2:
            raise DomainError("beta grid needs at least 2 points")

    @classmethod
    def pinball(cls, p):
        return cls(PINBALL, p)

    @classmethod
    def kb_normalized(cls, p):
        return cls(KB_NORMALIZED, p)

    @classmethod
    def superquantile(cls, p, beta_grid_size=DEFAULT_BETA_GRID, beta_max=DEFAULT_BETA_MAX):
        return cls(SUPERQUANTILE, p, beta_grid_size, beta_max)

    @classmethod
    def expectile(cls, p):
        return cls(EXPECTILE, p)


def _as_sample(sample) -> np.ndarray:
    z = np.asarray(sample, dtype=float).ravel()
    if z.size == 0:
        raise DataError("residual sample is empty")
    if not np.all(np.isfinite(z)):
        raise DataError("residual sample contains non-finite values")
    return z


def pinball(p, z):
    """Pinball loss: p*z for z > 0, -(1-p)*z otherwise.  Always >= 0.

    ``p`` may be a scalar or an array broadcastable against ``z``.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise DomainError("confidence level must lie in (0, 1)")
    z = np.asarray(z, dtype=float)
    out = np.where(z > 0, p * z, (p - 1.0) * z)
    return out if out.ndim else float(out)


def beta_grid(kind: ErrorKind) -> tuple[np.ndarray, float]:
    """Midpoint nodes and cell width used by the superquantile error."""
    step = kind.beta_max / kind.beta_grid_size
    nodes = (np.arange(kind.beta_grid_size) + 0.5) * step
    return nodes, step


def discrete_superquantile(beta: float, sample) -> float:
    """Tail average above the ``beta``-quantile with exact atom splitting.

    For sorted values z_(1..N) and k = ceil(beta*N), the value is
    ``((k/N - beta) * z_(k) + sum_{j>k} z_(j)/N) / (1 - beta)``; at
    ``beta = 0`` it is the mean.
    """
    z = np.sort(_as_sample(sample))
    if not 0.0 <= beta < 1.0:
        raise DomainError(f"beta must lie in [0, 1), got {beta}")
    n = z.size
    if beta == 0.0:
        return float(z.mean())
    k = int(np.ceil(beta * n))
    tail = z[k:].sum() / n
    return float(((k / n - beta) * z[k - 1] + tail) / (1.0 - beta))


def _superquantile_curve(z_sorted: np.ndarray, betas: np.ndarray) -> np.ndarray:
    # vectorized discrete_superquantile over a beta grid (all betas > 0)
    n = z_sorted.size
    suffix = np.concatenate([np.cumsum(z_sorted[::-1])[::-1], [0.0]]) / n
    k = np.ceil(betas * n).astype(int)
    return ((k / n - betas) * z_sorted[k - 1] + suffix[k]) / (1.0 - betas)


def error_value(kind: ErrorKind, sample) -> float:
    """The error functional applied to a discrete equal-probability sample."""
    z = _as_sample(sample)
    p = kind.p
    if kind.kind == PINBALL:
        return float(np.mean(pinball(p, z)))
    if kind.kind == KB_NORMALIZED:
        pos = np.maximum(z, 0.0)
        neg = np.maximum(-z, 0.0)
        return float(np.mean(p / (1.0 - p) * pos + neg))
    if kind.kind == EXPECTILE:
        pos = np.maximum(z, 0.0)
        neg = np.maximum(-z, 0.0)
        return float(np.mean(p * pos**2 + (1.0 - p) * neg**2))
    betas, step = beta_grid(kind)
    curve = _superquantile_curve(np.sort(z), betas)
    integral = np.maximum(curve, 0.0).sum() * step
    return float(integral / (1.0 - p) - z.mean())


def statistic(kind: ErrorKind, sample, tol: float = 1e-8, max_iter: int = 500) -> float:
    """argmin over C of ``error_value(kind, sample - C)`` by golden section.

    The objective is convex in C; for pinball the minimizer set is the
    empirical quantile interval and any point of it may be returned.
    """
    z = _as_sample(sample)
    lo = float(z.min())
    hi = float(z.max())
    span = max(hi - lo, 1.0)
    a, b = lo - 0.5 * span, hi + 0.5 * span

    def objective(c):
        return error_value(kind, z - c)

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = objective(x1), objective(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            return 0.5 * (a + b)
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = objective(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = objective(x2)
    raise SolverError(f"statistic search did not reach tolerance {tol} in {max_iter} iterations")
