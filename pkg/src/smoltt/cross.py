"""TT-cross interpolation of black-box tensors.

Alternating left/right sweeps over fibers; each sweep picks new interpolation
index sets with :func:`maxvol` on the QR factor of the unfolded fibers. The
rank grows by ``rank_step`` per sweep until the sampled change between sweeps
drops under ``eps_cross`` or ``max_rank`` is reached.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .tt import TTTensor, tt_eval_many, tt_round

__all__ = [
    "CrossConfig",
    "CrossInfo",
    "CrossEvaluationError",
    "CrossConvergenceWarning",
    "maxvol",
    "tt_cross_approximate",
]


class CrossEvaluationError(ValueError):
    """The sampled function returned a non-finite value."""

    def __init__(self, index):
        self.index = tuple(int(i) for i in index)
        super().__init__(f"non-finite function value at index {self.index}")


class CrossConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class CrossConfig:
    eps_cross: float = 1e-6
    max_rank: int = 64
    max_sweeps: int = 20
    validation_samples: int = 1000
    seed: int = 0
    init_rank: int = 2
    rank_step: int = 2

    def __post_init__(self):
        if not self.eps_cross > 0:
            raise ValueError(f"eps_cross must be positive, got {self.eps_cross}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if self.max_rank < 1:
            raise ValueError(f"max_rank must be >= 1, got {self.max_rank}")


@dataclass
class CrossInfo:
    converged: bool
    sweeps: int
    error_estimate: float
    last_change: float
    evaluations: int
    # fibers of the last core: every index in them is interpolated exactly
    final_fiber_indices: np.ndarray


def maxvol(a: np.ndarray, tol: float = 1.05, max_iters: int = 100) -> np.ndarray:
    """Row indices of a nearly dominant ``r x r`` submatrix of a tall ``a``.

    Starts from the pivots of a column-pivoted QR of ``a.T`` and swaps rows while some coefficient of
    ``a @ inv(a[rows])`` exceeds ``tol`` in modulus.
    """
    n, r = a.shape
    if n < r:
        raise ValueError(f"maxvol needs a tall matrix, got {a.shape}")
    if r == 0:
        return np.zeros(0, dtype=np.int64)
    _, _, piv = scipy.linalg.qr(a.T, mode="economic", pivoting=True)
    rows = np.array(piv[:r], dtype=np.int64)
    try:
        b = np.linalg.solve(a[rows].T, a.T).T
    except np.linalg.LinAlgError:
        return rows
    for _ in range(max_iters):
        i, j = np.unravel_index(np.argmax(np.abs(b)), b.shape)
        if abs(b[i, j]) <= tol:
            break
        rows[j] = i
        # rank-one update of the coefficient matrix after swapping row j for i
        bj = b[:, j].copy()
        bi = b[i, :].copy()
        bi[j] -= 1.0
        b -= np.outer(bj, bi / b[i, j])
    return rows


def _fiber_indices(left: np.ndarray, n: int, right: np.ndarray) -> np.ndarray:
    """All (left, i, right) index rows in C order of (left, i, right)."""
    nl, nr = left.shape[0], right.shape[0]
    li = np.repeat(left, n * nr, axis=0)
    mi = np.tile(np.repeat(np.arange(n), nr), nl)[:, None]
    ri = np.tile(right, (nl * n, 1))
    return np.hstack([li, mi, ri]).astype(np.int64)


class _Sampler:
    def __init__(self, f, vectorized):
        self.f = f
        self.vectorized = vectorized
        self.count = 0

    def __call__(self, idx: np.ndarray) -> np.ndarray:
        self.count += idx.shape[0]
        if self.vectorized:
            vals = np.asarray(self.f(idx), dtype=float).reshape(-1)
        else:
            vals = np.array([self.f(tuple(row)) for row in idx], dtype=float)
        bad = ~np.isfinite(vals)
        if bad.any():
            raise CrossEvaluationError(idx[np.argmax(bad)])
        return vals


def _random_rows(rng, mode_sizes, count):
    if not mode_sizes:
        return np.zeros((count, 0), dtype=np.int64)
    return np.stack([rng.integers(0, n, size=count) for n in mode_sizes], axis=1)


def _augment(rows: np.ndarray, extra: np.ndarray, cap: int) -> np.ndarray:
    # old rows first so that earlier pivots survive the cap
    fresh = [r for r in np.unique(extra, axis=0) if not (rows == r).all(axis=1).any()]
    if fresh:
        rows = np.vstack([rows, np.array(fresh, dtype=np.int64)])
    return rows[:cap]


def tt_cross_approximate(
    f: Callable,
    mode_sizes,
    cfg: Optional[CrossConfig] = None,
    vectorized: bool = True,
    full_output: bool = False,
):
    """Approximate a black-box tensor in TT format.

    Parameters
    ----------
    f : callable
        With ``vectorized=True`` it maps an ``(M, d)`` integer array to ``M``
        values; otherwise it takes one index tuple and returns a scalar.
    mode_sizes : sequence of int
    cfg : CrossConfig
    full_output : bool
        Also return a :class:`CrossInfo`.

    If the tolerance is not met within ``max_sweeps`` the best tensor found
    is returned and a :class:`CrossConvergenceWarning` carrying the sampled
    error estimate is issued.
    """
    cfg = cfg or CrossConfig()
    n = [int(m) for m in mode_sizes]
    d = len(n)
    rng = np.random.default_rng(cfg.seed)
    sample = _Sampler(f, vectorized)

    if d == 1:
        idx = np.arange(n[0])[:, None]
        x = TTTensor([sample(idx).reshape(1, n[0], 1)])
        info = CrossInfo(True, 0, 0.0, 0.0, sample.count, idx)
        return (x, info) if full_output else x

    val_idx = _random_rows(rng, n, cfg.validation_samples)
    val_ref = sample(val_idx)
    val_norm = np.linalg.norm(val_ref)

    # right[k]: suffix rows over modes k..d-1 linking core k-1 to core k
    right = [None] * (d + 1)
    left = [None] * (d + 1)
    right[d] = np.zeros((1, 0), dtype=np.int64)
    left[0] = np.zeros((1, 0), dtype=np.int64)
    for k in range(1, d):
        cap = min(cfg.max_rank, int(np.prod(n[k:])), int(np.prod(n[:k])))
        right[k] = np.unique(_random_rows(rng, n[k:], cfg.init_rank), axis=0)[:cap]

    target = cfg.init_rank
    prev_vals = None
    best = None
    last_change = np.inf
    converged = False
    sweeps = 0
    fibers = None

    for sweep in range(cfg.max_sweeps):
        sweeps = sweep + 1
        forward = sweep % 2 == 0
        cores = [None] * d
        if forward:
            if sweep > 0:
                for k in range(1, d):
                    cap = min(cfg.max_rank, target, int(np.prod(n[k:])),
                              int(np.prod(n[:k])))
                    extra = _random_rows(rng, n[k:], cfg.rank_step)
                    right[k] = _augment(right[k], extra, cap)
            for k in range(d - 1):
                idx = _fiber_indices(left[k], n[k], right[k + 1])
                c = sample(idx).reshape(left[k].shape[0] * n[k], right[k + 1].shape[0])
                q, _ = np.linalg.qr(c)
                rows = maxvol(q)
                cores[k] = np.linalg.solve(q[rows].T, q.T).T.reshape(
                    left[k].shape[0], n[k], -1)
                left[k + 1] = np.hstack([left[k][rows // n[k]], (rows % n[k])[:, None]])
            fibers = _fiber_indices(left[d - 1], n[d - 1], right[d])
            cores[d - 1] = sample(fibers).reshape(left[d - 1].shape[0], n[d - 1], 1)
        else:
            for k in range(1, d):
                cap = min(cfg.max_rank, target, int(np.prod(n[:k])),
                          int(np.prod(n[k:])))
                extra = _random_rows(rng, n[:k], cfg.rank_step)
                left[k] = _augment(left[k], extra, cap)
            for k in range(d - 1, 0, -1):
                idx = _fiber_indices(left[k], n[k], right[k + 1])
                c = sample(idx).reshape(left[k].shape[0], n[k] * right[k + 1].shape[0])
                q, _ = np.linalg.qr(c.T)
                rows = maxvol(q)
                cores[k] = np.linalg.solve(q[rows].T, q.T).reshape(
                    -1, n[k], right[k + 1].shape[0])
                right[k] = np.hstack([(rows // right[k + 1].shape[0])[:, None],
                                      right[k + 1][rows % right[k + 1].shape[0]]])
            fibers = _fiber_indices(left[0], n[0], right[1])
            cores[0] = sample(fibers).reshape(1, n[0], right[1].shape[0])
        x = TTTensor(cores)
        vals = tt_eval_many(x, val_idx)
        err = np.linalg.norm(vals - val_ref) / val_norm if val_norm > 0 else \
            np.linalg.norm(vals)
        if best is None or err <= best[1]:
            best = (x, err, fibers)
        if prev_vals is not None:
            denom = np.linalg.norm(vals)
            last_change = np.linalg.norm(vals - prev_vals) / denom if denom > 0 else 0.0
            if last_change < cfg.eps_cross and err <= 10 * cfg.eps_cross:
                converged = True
                best = (x, err, fibers)
                break
        prev_vals = vals
        target += cfg.rank_step

    x, err, fibers = best
    # drop rank directions that are pure round-off
    x = tt_round(x, 0.0)
    if not converged:
        warnings.warn(
            f"TT-cross did not converge in {sweeps} sweeps; "
            f"sampled relative error {err:.3e}",
            CrossConvergenceWarning,
            stacklevel=2,
        )
    info = CrossInfo(converged, sweeps, float(err), float(last_change),
                     sample.count, fibers)
    return (x, info) if full_output else x
