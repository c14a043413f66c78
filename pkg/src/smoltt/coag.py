"""Birth and death integrals of the coagulation equation in TT format.

The birth term ``L1(v) = int_0^v K(v - u, u) n(v - u) n(u) du`` factorizes
mode by mode into one-dimensional lower-triangular convolutions, done with
FFTs and a trapezoid endpoint correction. The death term
``L2(v) = int K(v, u) n(u) du`` is a weighted contraction of the kernel's
``u`` cores with the solution.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kernels import KernelTT
from .tt import Grid, TTTensor, tt_add, tt_hadamard, tt_round

__all__ = [
    "OperatorWorkspace",
    "RankOverflowError",
    "trapezoid_convolution",
    "birth_term_L1",
    "death_term_L2",
]


class RankOverflowError(MemoryError):
    """Assembled operator ranks exceed the configured cap before rounding."""


def _next_pow2(m: int) -> int:
    return 1 << (int(m) - 1).bit_length()


@dataclass(frozen=True)
class OperatorWorkspace:
    fft_length: int
    eps_round: float = 1e-8
    max_rank: Optional[int] = None
    # largest interior rank of one unrounded birth-term product
    max_assembly_rank: int = 4096

    def __post_init__(self):
        if self.fft_length < 1:
            raise ValueError("fft_length must be positive")

    @classmethod
    def for_grid(cls, grid: Grid, eps_round=1e-8, max_rank=None, **kw):
        return cls(_next_pow2(2 * grid.N), eps_round, max_rank, **kw)

    def check(self, grid: Grid):
        if self.fft_length < 2 * grid.N - 1:
            raise ValueError(
                f"fft_length {self.fft_length} < 2N-1 = {2 * grid.N - 1}: "
                "the convolution would wrap around"
            )


def trapezoid_convolution(a: np.ndarray, b: np.ndarray, h: float,
                          fft_length: Optional[int] = None) -> np.ndarray:
    """``c_i = h [sum_{k<=i} a_{i-k} b_k - a_i b_0 / 2 - a_0 b_i / 2]`` along the last axis.

    This is the trapezoid rule for ``int_0^{v_i} a(v_i - u) b(u) du``.
    ``a`` and ``b`` broadcast against each other.
    """
    N = a.shape[-1]
    L = fft_length or _next_pow2(2 * N)
    full = np.fft.irfft(np.fft.rfft(a, L) * np.fft.rfft(b, L), L)[..., :N]
    return h * (full - 0.5 * a * b[..., :1] - 0.5 * a[..., :1] * b)


def _kernel_slices(K: KernelTT, x: int):
    """``K(w, u)`` restricted to boundary index ``x``: a v-part and a u-part TT."""
    v = list(K.v_cores)
    v[-1] = v[-1][:, :, x:x + 1]
    u = list(K.u_cores)
    u[0] = u[0][x:x + 1]
    return TTTensor(v), TTTensor(u)


def _mode_convolution(A: np.ndarray, B: np.ndarray, h: float, L: int) -> np.ndarray:
    """All pairwise fiber convolutions as one core of shape ``(la*lb, N, ra*rb)``."""
    la, N, ra = A.shape
    lb, _, rb = B.shape
    FA = np.fft.rfft(A, L, axis=1)
    FB = np.fft.rfft(B, L, axis=1)
    prod = np.einsum("afc,bfd->abfcd", FA, FB)
    full = np.fft.irfft(prod, L, axis=2)[:, :, :N]
    full -= 0.5 * np.einsum("aic,bd->abicd", A, B[:, 0, :])
    full -= 0.5 * np.einsum("ac,bid->abicd", A[:, 0, :], B)
    return (h * full).reshape(la * lb, N, ra * rb)


def birth_term_L1(n: TTTensor, K: KernelTT, grid: Grid,
                  ws: OperatorWorkspace) -> TTTensor:
    """Trapezoid approximation of the birth integral (without the factor 1/2).

    Summing over the kernel's boundary index ``x`` splits the integral into
    ``R`` convolutions of ``K^v_x * n`` with ``K^u_x * n``. Each of these
    factors is rank-revealed at the noise floor, so no accuracy is lost
    before the final rounding at ``eps_round``.
    """
    if n.mode_sizes != grid.mode_sizes or K.d != grid.d:
        raise ValueError("solution, kernel and grid dimensions disagree")
    ws.check(grid)
    h, L = grid.h, ws.fft_length
    acc = None
    for x in range(K.boundary_rank):
        kv, ku = _kernel_slices(K, x)
        a = tt_round(tt_hadamard(kv, n), 0.0)
        b = tt_round(tt_hadamard(ku, n), 0.0)
        rank = max(ra * rb for ra, rb in zip(a.ranks, b.ranks))
        if rank > ws.max_assembly_rank:
            raise RankOverflowError(
                f"birth-term product rank {rank} exceeds cap {ws.max_assembly_rank}; "
                "raise the cap or use a larger eps_round"
            )
        term = TTTensor([_mode_convolution(ca, cb, h, L) for ca, cb in zip(a.cores, b.cores)])
        acc = term if acc is None else tt_round(tt_add(acc, term), 0.0)
    return tt_round(acc, ws.eps_round, ws.max_rank)


def death_term_L2(n: TTTensor, K: KernelTT, grid: Grid,
                  ws: OperatorWorkspace) -> TTTensor:
    """Trapezoid approximation of ``int K(v, u) n(u) du`` over the grid box."""
    if n.mode_sizes != grid.mode_sizes or K.d != grid.d:
        raise ValueError("solution, kernel and grid dimensions disagree")
    w = grid.quad_weights
    m = np.eye(K.boundary_rank)
    for ku, nc in zip(K.u_cores, n.cores):
        s = np.einsum("j,ajc,bjd->abcd", w, ku, nc)
        a, b, c_, d_ = s.shape
        m = m.reshape(m.shape[0], a * b) @ s.reshape(a * b, c_ * d_)
    vec = m[:, 0]
    cores = list(K.v_cores)
    cores[-1] = np.tensordot(cores[-1], vec, axes=(2, 0))[:, :, None]
    return tt_round(TTTensor(cores), ws.eps_round, ws.max_rank)
