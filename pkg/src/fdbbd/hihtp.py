"""Hierarchical hard thresholding pursuit (HiHTP).

Recovers an (s, k)-sparse tensor ``W`` (at most ``k`` nonzero columns, each
with at most ``s`` nonzero entries) from ``y = C(W) + noise``. Each iteration
takes a gradient step, projects hierarchically onto the (s, k)-sparse set,
and solves least squares on the selected support.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .lifting import MeasurementOp
from .signals import ParameterError

__all__ = [
    "HihtpConfig",
    "HihtpResult",
    "NumericalDivergence",
    "project_sk",
    "support_of",
    "restricted_least_squares",
    "solve",
]

log = logging.getLogger(__name__)


class NumericalDivergence(ArithmeticError):
    """The solver produced non-finite values."""

    def __init__(self, iteration: int, message: str = "non-finite iterate"):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class HihtpConfig:
    s: int
    k: int
    max_iter: int = 100
    tol: float = 1e-10
    step_size: float = 1.0
    backtracking: bool = False

    def __post_init__(self):
        if self.s < 1 or self.k < 1:
            raise ParameterError("sparsity levels must be >= 1")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ParameterError("tol must be positive")


@dataclass
class HihtpResult:
    tensor: np.ndarray
    support: frozenset
    iterations: int
    residual: float
    converged: bool = False
    residual_history: list = field(default_factory=list)
    condition: float = 1.0


def _top_indices(values: np.ndarray, count: int, axis: int) -> np.ndarray:
    # stable sort on -|x| keeps the lowest index first among ties
    order = np.argsort(-values, axis=axis, kind="stable")
    return np.take(order, np.arange(count), axis=axis)


def project_sk(W, s: int, k: int):
    """Best (s, k)-sparse approximation of ``W``.

    Every column keeps its ``s`` largest-magnitude entries, then the ``k``
    columns of largest remaining norm survive. Ties go to the lowest index.

    Returns
    -------
    (ndarray, ndarray)
        The projected tensor and a boolean mask of its support.
    """
    W = np.asarray(W)
    mu, n = W.shape
    s = min(s, mu)
    k = min(k, n)
    mag = np.abs(W)
    rows = _top_indices(mag, s, axis=0)  # (s, n)
    mask = np.zeros(W.shape, dtype=bool)
    np.put_along_axis(mask, rows, True, axis=0)
    col_energy = np.sum(np.where(mask, mag, 0.0) ** 2, axis=0)
    keep = _top_indices(col_energy, k, axis=0)
    col_mask = np.zeros(n, dtype=bool)
    col_mask[keep] = True
    mask &= col_mask[None, :]
    return np.where(mask, W, 0), mask


def support_of(mask) -> frozenset:
    r, c = np.nonzero(mask)
    return frozenset(zip(r.tolist(), c.tolist()))


def restricted_least_squares(op: MeasurementOp, y, support, rcond: float | None = None):
    """Minimise ``||y - C(W)||`` over tensors supported on ``support``.

    ``support`` is a boolean ``(mu, n)`` mask or an iterable of ``(row, col)``
    pairs. Rank-deficient problems get the minimum-norm solution.

    Returns
    -------
    (ndarray, float)
        The tensor and the 2-norm condition number of the restricted operator
        (``inf`` when it is numerically rank deficient).
    """
    y = np.asarray(y)
    if isinstance(support, np.ndarray) and support.dtype == bool:
        rows, cols = np.nonzero(support)
    else:
        pairs = sorted(support)
        rows = np.array([p[0] for p in pairs], dtype=np.int64)
        cols = np.array([p[1] for p in pairs], dtype=np.int64)
    W = np.zeros(op.shape, dtype=complex)
    if len(rows) == 0:
        return W, 1.0
    A = op.restricted_matrix(rows, cols)
    coef, _, rank, sv = np.linalg.lstsq(A, y, rcond=rcond)
    if rank < len(rows):
        cond = np.inf
        log.debug("restricted operator rank %d < %d columns", rank, len(rows))
    else:
        cond = float(sv[0] / sv[-1])
    W[rows, cols] = coef
    return W, cond


def solve(op: MeasurementOp, y, cfg: HihtpConfig, W0=None) -> HihtpResult:
    """Run HiHTP on ``y`` until the support stabilises, the residual drops
    below ``cfg.tol`` (relative to ``||y||``), or ``cfg.max_iter`` is hit.
    """
    y = np.asarray(y, dtype=complex)
    if y.shape != (op.mu,):
        raise ParameterError(f"measurement length {y.shape} != ({op.mu},)")
    ynorm = np.linalg.norm(y)
    W = np.zeros(op.shape, dtype=complex) if W0 is None else np.array(W0, dtype=complex)
    if ynorm == 0:
        return HihtpResult(W * 0, frozenset(), 1, 0.0, True, [0.0])

    r = y - op.apply(W)
    res = np.linalg.norm(r)
    history = [float(res)]
    prev_mask = None
    cond = 1.0
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        grad = op.apply_adjoint(r)
        step = cfg.step_size
        if cfg.backtracking:
            # exact line search along the gradient for the quadratic loss
            Cg = op.apply(grad)
            denom = np.vdot(Cg, Cg).real
            if denom > 0:
                step *= np.vdot(grad, grad).real / denom
        half = W + step * grad
        if not np.all(np.isfinite(half)):
            raise NumericalDivergence(it)
        _, mask = project_sk(half, cfg.s, cfg.k)
        W, cond = restricted_least_squares(op, y, mask)
        if not np.all(np.isfinite(W)):
            raise NumericalDivergence(it)
        r = y - op.apply(W)
        res = np.linalg.norm(r)
        history.append(float(res))
        if res <= cfg.tol * ynorm:
            converged = True
            break
        if prev_mask is not None and np.array_equal(mask, prev_mask):
            converged = True
            break
        prev_mask = mask
    return HihtpResult(W, support_of(W != 0), it, float(res), converged, history, cond)
