"""Tensor-train representation of grid functions and its arithmetic.

A tensor ``x`` of shape ``(n_1, ..., n_d)`` is stored as a chain of cores
``G_k`` of shape ``(r_{k-1}, n_k, r_k)`` with ``r_0 = r_d = 1`` so that::

    x[i_1, ..., i_d] = G_1[:, i_1, :] @ G_2[:, i_2, :] @ ... @ G_d[:, i_d, :]

All operations return new tensors; the cores of a :class:`TTTensor` are made
read-only on construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Grid",
    "TTTensor",
    "tt_from_rank_one",
    "tt_ones",
    "tt_zeros",
    "tt_const",
    "tt_eval",
    "tt_eval_many",
    "tt_add",
    "tt_scale",
    "tt_hadamard",
    "tt_dot",
    "tt_norm",
    "tt_round",
    "tt_full",
]

# singular values below NOISE_FLOOR * eps_machine * ||x|| are dropped
NOISE_FLOOR = 1e2


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[0, v_max]^d`` with ``N`` nodes per component.

    Both endpoints are grid nodes, so ``h = v_max / (N - 1)``.
    """

    d: int
    N: int
    v_max: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.N < 2:
            raise ValueError(f"N must be >= 2, got {self.N}")
        if not self.v_max > 0:
            raise ValueError(f"v_max must be positive, got {self.v_max}")

    @property
    def h(self) -> float:
        return self.v_max / (self.N - 1)

    @property
    def nodes(self) -> np.ndarray:
        v = np.arange(self.N) * self.h
        v[-1] = self.v_max
        return v

    @property
    def quad_weights(self) -> np.ndarray:
        w = np.full(self.N, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    @property
    def mode_sizes(self) -> tuple:
        return (self.N,) * self.d


def _freeze(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class TTTensor:
    """Immutable tensor train.

    Parameters
    ----------
    cores : sequence of 3-way arrays
        Core ``k`` has shape ``(r_{k-1}, n_k, r_k)``; the outer ranks must be 1.
    """

    __slots__ = ("_cores",)

    def __init__(self, cores: Sequence[np.ndarray]):
        cores = tuple(_freeze(c) for c in cores)
        if not cores:
            raise ValueError("a tensor train needs at least one core")
        for k, c in enumerate(cores):
            if c.ndim != 3:
                raise ValueError(f"core {k} must be 3-way, got shape {c.shape}")
            if k > 0 and cores[k - 1].shape[2] != c.shape[0]:
                raise ValueError(
                    f"rank mismatch between cores {k - 1} and {k}: "
                    f"{cores[k - 1].shape} vs {c.shape}"
                )
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValueError("boundary ranks r_0 and r_d must equal 1")
        self._cores = cores

    @property
    def cores(self) -> tuple:
        return self._cores

    @property
    def d(self) -> int:
        return len(self._cores)

    @property
    def mode_sizes(self) -> tuple:
        return tuple(c.shape[1] for c in self._cores)

    @property
    def ranks(self) -> tuple:
        return (1,) + tuple(c.shape[2] for c in self._cores)

    @property
    def max_rank(self) -> int:
        return max(self.ranks)

    @property
    def size(self) -> int:
        return int(np.prod(self.mode_sizes, dtype=np.int64))

    def __repr__(self):
        return f"TTTensor(mode_sizes={self.mode_sizes}, ranks={self.ranks})"

    def __getitem__(self, index):
        return tt_eval(self, index)

    def __add__(self, other):
        return tt_add(self, other)

    def __sub__(self, other):
        return tt_add(self, tt_scale(other, -1.0))

    def __neg__(self):
        return tt_scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, TTTensor):
            return tt_hadamard(self, other)
        return tt_scale(self, other)

    __rmul__ = __mul__

    def full(self) -> np.ndarray:
        return tt_full(self)


def _check_same_shape(a: TTTensor, b: TTTensor):
    if a.mode_sizes != b.mode_sizes:
        raise ValueError(
            f"tensor shapes differ: {a.mode_sizes} vs {b.mode_sizes}"
        )


def tt_from_rank_one(factors: Sequence[Sequence[float]], mode_sizes=None) -> TTTensor:
    """Rank-one tensor ``x[i_1..i_d] = prod_k factors[k][i_k]``."""
    factors = [np.asarray(f, dtype=float) for f in factors]
    if mode_sizes is not None:
        if len(mode_sizes) != len(factors):
            raise ValueError(
                f"expected {len(mode_sizes)} factors, got {len(factors)}"
            )
        for k, (f, n) in enumerate(zip(factors, mode_sizes)):
            if f.shape != (n,):
                raise ValueError(
                    f"factor {k} has length {f.size}, grid expects {n}"
                )
    return TTTensor([f.reshape(1, -1, 1) for f in factors])


def tt_ones(d: int, N: int) -> TTTensor:
    if d < 1 or N < 1:
        raise ValueError(f"invalid shape d={d}, N={N}")
    return tt_from_rank_one([np.ones(N)] * d)


def tt_const(mode_sizes, value: float = 1.0) -> TTTensor:
    """Rank-one tensor with every element equal to ``value``."""
    cores = [np.ones((1, int(m), 1)) for m in mode_sizes]
    cores[0] = cores[0] * value
    return TTTensor(cores)


def tt_zeros(d: int, N: int) -> TTTensor:
    if d < 1 or N < 1:
        raise ValueError(f"invalid shape d={d}, N={N}")
    return tt_from_rank_one([np.zeros(N)] * d)


def tt_eval(x: TTTensor, index) -> float:
    """Element at a multi-index, O(d r^2)."""
    index = tuple(int(i) for i in index)
    if len(index) != x.d:
        raise IndexError(f"expected {x.d} indices, got {len(index)}")
    v = np.ones(1)
    for k, (i, c) in enumerate(zip(index, x.cores)):
        if not 0 <= i < c.shape[1]:
            raise IndexError(f"index {i} out of range for mode {k} of size {c.shape[1]}")
        v = v @ c[:, i, :]
    return float(v[0])


def tt_eval_many(x: TTTensor, indices) -> np.ndarray:
    """Elements at an ``(M, d)`` integer array of multi-indices."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 2 or indices.shape[1] != x.d:
        raise IndexError(f"expected an (M, {x.d}) index array, got {indices.shape}")
    n = np.asarray(x.mode_sizes)
    if indices.size and (indices.min() < 0 or np.any(indices >= n)):
        raise IndexError("index out of range")
    v = np.ones((indices.shape[0], 1))
    for k, c in enumerate(x.cores):
        v = np.einsum("ma,amb->mb", v, c[:, indices[:, k], :])
    return v[:, 0]


def tt_full(x: TTTensor) -> np.ndarray:
    """Dense array; only sensible for small tensors."""
    out = x.cores[0].reshape(x.cores[0].shape[1], -1)
    for c in x.cores[1:]:
        out = out @ c.reshape(c.shape[0], -1)
        out = out.reshape(-1, c.shape[2])
    return out.reshape(x.mode_sizes)


def tt_scale(x: TTTensor, alpha: float) -> TTTensor:
    cores = list(x.cores)
    cores[0] = alpha * cores[0]
    return TTTensor(cores)


def tt_add(a: TTTensor, b: TTTensor) -> TTTensor:
    """Exact sum; interior ranks add."""
    _check_same_shape(a, b)
    if a.d == 1:
        return TTTensor([a.cores[0] + b.cores[0]])
    cores = []
    last = a.d - 1
    for k, (ca, cb) in enumerate(zip(a.cores, b.cores)):
        if k == 0:
            cores.append(np.concatenate([ca, cb], axis=2))
        elif k == last:
            cores.append(np.concatenate([ca, cb], axis=0))
        else:
            ra0, n, ra1 = ca.shape
            rb0, _, rb1 = cb.shape
            c = np.zeros((ra0 + rb0, n, ra1 + rb1))
            c[:ra0, :, :ra1] = ca
            c[ra0:, :, ra1:] = cb
            cores.append(c)
    return TTTensor(cores)


def tt_hadamard(a: TTTensor, b: TTTensor) -> TTTensor:
    """Exact elementwise product; interior ranks multiply."""
    _check_same_shape(a, b)
    cores = []
    for ca, cb in zip(a.cores, b.cores):
        c = np.einsum("aic,bid->abicd", ca, cb)
        ra0, rb0, n, ra1, rb1 = c.shape
        cores.append(c.reshape(ra0 * rb0, n, ra1 * rb1))
    return TTTensor(cores)


def tt_dot(a: TTTensor, b: TTTensor) -> float:
    """Euclidean inner product by core contraction."""
    _check_same_shape(a, b)
    m = np.ones((1, 1))
    for ca, cb in zip(a.cores, b.cores):
        m = np.einsum("ab,aic,bid->cd", m, ca, cb, optimize=True)
    return float(m[0, 0])


def tt_norm(x: TTTensor) -> float:
    return float(np.sqrt(max(tt_dot(x, x), 0.0)))


def _left_orthogonalize(cores):
    """QR sweep left to right; returns new cores, last one carries the norm."""
    cores = [np.array(c) for c in cores]
    for k in range(len(cores) - 1):
        r0, n, r1 = cores[k].shape
        q, r = np.linalg.qr(cores[k].reshape(r0 * n, r1))
        cores[k] = q.reshape(r0, n, q.shape[1])
        cores[k + 1] = np.tensordot(r, cores[k + 1], axes=(1, 0))
    return cores


def _truncation_rank(s: np.ndarray, delta: float, max_rank: Optional[int]) -> int:
    # smallest r with sqrt(sum_{j >= r} s_j^2) <= delta
    tail = np.sqrt(np.cumsum((s ** 2)[::-1]))[::-1]
    keep = np.nonzero(tail > delta)[0]
    r = int(keep[-1]) + 1 if keep.size else 0
    r = max(r, 1)
    if max_rank is not None:
        r = min(r, int(max_rank))
    return r


def tt_round(x: TTTensor, eps: float = 0.0, max_rank: Optional[int] = None) -> TTTensor:
    """Recompress ``x`` so that ``||out - x||_F <= eps * ||x||_F``.

    Left-to-right QR orthogonalization, then right-to-left truncated SVDs with
    the per-core threshold ``eps / sqrt(d - 1) * ||x||_F``. ``max_rank`` caps
    the ranks on top of the tolerance (the bound then no longer holds).
    """
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    d = x.d
    if d == 1:
        return x
    cores = _left_orthogonalize(x.cores)
    nrm = np.linalg.norm(cores[-1])
    if nrm == 0.0 or not np.isfinite(nrm):
        if not np.isfinite(nrm):
            raise FloatingPointError("tensor contains non-finite values")
        return TTTensor([np.zeros((1, n, 1)) for n in x.mode_sizes])
    delta = eps / np.sqrt(d - 1) * nrm
    floor = NOISE_FLOOR * np.finfo(float).eps * nrm
    delta = max(delta, floor)
    for k in range(d - 1, 0, -1):
        r0, n, r1 = cores[k].shape
        u, s, vt = np.linalg.svd(cores[k].reshape(r0, n * r1), full_matrices=False)
        r = _truncation_rank(s, delta, max_rank)
        cores[k] = vt[:r].reshape(r, n, r1)
        cores[k - 1] = np.tensordot(cores[k - 1], u[:, :r] * s[:r], axes=(2, 0))
    return TTTensor(cores)
