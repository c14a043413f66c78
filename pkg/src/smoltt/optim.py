"""Extremum search over tensor trains without densification.

:func:`tt_max` runs alternating sweeps over candidate prefixes and suffixes.
At mode ``k`` every element ``x[p, i, s]`` with ``p`` a candidate prefix and
``s`` a candidate suffix is evaluated (all ``N`` values of each fiber); the
next prefix set is the union of the best-scoring ``(p, i)`` pairs and the
maxvol rows of the new interface matrix. The minimum comes from the maximum
of the shifted tensor ``M * ones - x``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .cross import maxvol
from .tt import TTTensor, tt_add, tt_const, tt_eval, tt_scale

__all__ = [
    "OptimConfig",
    "Extrema",
    "ScanLimitError",
    "tt_max",
    "tt_extrema",
    "tt_min_abs",
    "dense_scan_extrema",
]

DENSE_SCAN_CAP = 10 ** 8
# elements materialized at once during a dense scan
_SCAN_BLOCK = 2 ** 22


class ScanLimitError(MemoryError):
    pass


@dataclass(frozen=True)
class OptimConfig:
    sweeps: int = 4
    # None -> max(2 * max_rank(x), 8)
    candidates_per_mode: Optional[int] = None
    seed: int = 0
    use_dense_scan_below: int = 10 ** 6

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError(f"sweeps must be >= 1, got {self.sweeps}")
        if self.candidates_per_mode is not None and self.candidates_per_mode < 1:
            raise ValueError("candidates_per_mode must be >= 1")

    def candidates(self, x: TTTensor) -> int:
        if self.candidates_per_mode is not None:
            return self.candidates_per_mode
        return max(2 * x.max_rank, 8)


class Extrema(NamedTuple):
    min_value: float
    min_index: tuple
    max_value: float
    max_index: tuple


def dense_scan_extrema(x: TTTensor, cap: int = DENSE_SCAN_CAP):
    """Exact ``(min, argmin, max, argmax)`` by full enumeration.

    Ties go to the lexicographically smallest index.
    """
    if x.size > cap:
        raise ScanLimitError(f"dense scan of {x.size} elements exceeds cap {cap}")
    d = x.d
    n = x.mode_sizes
    # split so that the suffix block stays small
    m = 0
    while m < d - 1 and int(np.prod(n[m:])) * x.ranks[m] > _SCAN_BLOCK:
        m += 1
    prefix = np.ones((1, 1))
    for c in x.cores[:m]:
        prefix = np.einsum("pa,aib->pib", prefix, c).reshape(-1, c.shape[2])
    suffix = np.ones((1, 1))
    for c in reversed(x.cores[m:]):
        suffix = np.einsum("aib,bs->ais", c, suffix).reshape(c.shape[0], -1)
    nsuf = suffix.shape[1]
    rows = max(1, _SCAN_BLOCK // max(nsuf, 1))
    best_min = (np.inf, 0)
    best_max = (-np.inf, 0)
    for start in range(0, prefix.shape[0], rows):
        vals = (prefix[start:start + rows] @ suffix).ravel()
        j = int(np.argmin(vals))
        if vals[j] < best_min[0]:
            best_min = (float(vals[j]), start * nsuf + j)
        j = int(np.argmax(vals))
        if vals[j] > best_max[0]:
            best_max = (float(vals[j]), start * nsuf + j)
    imin = tuple(int(i) for i in np.unravel_index(best_min[1], n))
    imax = tuple(int(i) for i in np.unravel_index(best_max[1], n))
    # same contraction order as tt_eval so values compare exactly
    return tt_eval(x, imin), imin, tt_eval(x, imax), imax


def _lexi_best(vals: np.ndarray, idx: np.ndarray):
    """Largest value, ties to the lexicographically smallest index row."""
    top = vals.max()
    rows = idx[vals == top]
    order = np.lexsort(rows.T[::-1])
    return float(top), tuple(int(i) for i in rows[order[0]])


def _select(scores: np.ndarray, iface: np.ndarray, k: int) -> np.ndarray:
    top = np.argsort(-scores, kind="stable")[:k]
    q, _ = np.linalg.qr(iface)
    extra = maxvol(q) if q.shape[0] >= q.shape[1] else np.arange(q.shape[0])
    return np.unique(np.concatenate([top, extra]))


def tt_max(x: TTTensor, cfg: Optional[OptimConfig] = None):
    """Largest element found and its index.

    The returned value is re-evaluated at the returned index, so it never
    exceeds the true maximum. Small tensors are scanned exactly.
    """
    cfg = cfg or OptimConfig()
    if x.size <= cfg.use_dense_scan_below:
        _, _, vmax, imax = dense_scan_extrema(x)
        return vmax, imax
    d = x.d
    n = x.mode_sizes
    k = cfg.candidates(x)
    rng = np.random.default_rng(cfg.seed)
    cores = x.cores

    # suffix candidates per boundary: index rows and interface r x |S|
    suf_idx = [None] * (d + 1)
    suf_vec = [None] * (d + 1)
    suf_idx[d] = np.zeros((1, 0), dtype=np.int64)
    suf_vec[d] = np.ones((1, 1))
    for mu in range(d - 1, 0, -1):
        cnt = k
        idx = np.stack([rng.integers(0, n[j], size=cnt) for j in range(mu, d)], axis=1)
        idx = np.unique(idx, axis=0)
        vec = np.ones((1, idx.shape[0]))
        for j in range(d - 1, mu - 1, -1):
            vec = np.einsum("aib,bm->aim", cores[j], vec)
            vec = vec[:, idx[:, j - mu], np.arange(idx.shape[0])]
        suf_idx[mu], suf_vec[mu] = idx, vec

    pre_idx = [None] * (d + 1)
    pre_vec = [None] * (d + 1)
    pre_idx[0] = np.zeros((1, 0), dtype=np.int64)
    pre_vec[0] = np.ones((1, 1))
    best = (-np.inf, None)

    def consider(vals, idx):
        nonlocal best
        v, i = _lexi_best(vals, idx)
        if v > best[0] or (v == best[0] and i < best[1]):
            best = (v, i)

    for _ in range(cfg.sweeps):
        for mu in range(d):
            P, S = pre_vec[mu], suf_vec[mu + 1]
            t = np.einsum("pa,aib->pib", P, cores[mu])
            vals = np.einsum("pib,bs->pis", t, S)
            p, i, s = np.meshgrid(np.arange(P.shape[0]), np.arange(n[mu]),
                                  np.arange(S.shape[1]), indexing="ij")
            idx = np.hstack([pre_idx[mu][p.ravel()], i.reshape(-1, 1),
                             suf_idx[mu + 1][s.ravel()]])
            consider(vals.ravel(), idx)
            if mu < d - 1:
                iface = t.reshape(-1, t.shape[2])
                rows = _select(vals.max(axis=2).ravel(), iface, k)
                pre_idx[mu + 1] = np.hstack([pre_idx[mu][rows // n[mu]],
                                             (rows % n[mu])[:, None]])
                pre_vec[mu + 1] = iface[rows]
        for mu in range(d - 1, -1, -1):
            P, S = pre_vec[mu], suf_vec[mu + 1]
            t = np.einsum("aib,bs->ais", cores[mu], S)
            vals = np.einsum("pa,ais->pis", P, t)
            p, i, s = np.meshgrid(np.arange(P.shape[0]), np.arange(n[mu]),
                                  np.arange(S.shape[1]), indexing="ij")
            idx = np.hstack([pre_idx[mu][p.ravel()], i.reshape(-1, 1),
                             suf_idx[mu + 1][s.ravel()]])
            consider(vals.ravel(), idx)
            if mu > 0:
                # rows of the new suffix set are (i, s) pairs
                iface = t.reshape(t.shape[0], -1).T
                rows = _select(vals.max(axis=0).ravel(), iface, k)
                ns = S.shape[1]
                suf_idx[mu] = np.hstack([(rows // ns)[:, None],
                                         suf_idx[mu + 1][rows % ns]])
                suf_vec[mu] = iface[rows].T

    index = best[1]
    return tt_eval(x, index), index


def tt_extrema(x: TTTensor, cfg: Optional[OptimConfig] = None) -> Extrema:
    """Maximum, then minimum via the maximum of ``M * ones - x``.

    Both values are exact element values at the returned indices.
    """
    cfg = cfg or OptimConfig()
    if x.size <= cfg.use_dense_scan_below:
        return Extrema(*dense_scan_extrema(x))
    vmax, imax = tt_max(x, cfg)
    shifted = tt_add(tt_const(x.mode_sizes, vmax), tt_scale(x, -1.0))
    _, imin = tt_max(shifted, cfg)
    return Extrema(tt_eval(x, imin), imin, vmax, imax)


def tt_min_abs(x: TTTensor, cfg: Optional[OptimConfig] = None):
    """``(|min|, argmin, min < 0)`` from two maximum searches."""
    e = tt_extrema(x, cfg)
    return abs(e.min_value), e.min_index, e.min_value < 0
