"""Coagulation kernels in TT form, sources, moments and the exact solution."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cross import CrossConfig, tt_cross_approximate
from .tt import Grid, TTTensor, tt_from_rank_one, tt_round

__all__ = [
    "KernelTT",
    "build_constant_kernel",
    "build_zero_kernel",
    "build_ballistic_kernel",
    "build_kernel",
    "ballistic_kernel_value",
    "constant_kernel_value",
    "exponential_rank_one",
    "bessel_i0",
    "bessel_i0e",
    "analytic_constant_2d",
    "analytic_total_density",
    "analytic_grid_2d",
    "moment_density",
    "moment_mass",
]

# series below, asymptotic expansion above
I0_SWITCH = 15.0
_SERIES_TERMS = 60
_ASYMPTOTIC_TERMS = 30
# the interpolated kernel is recompressed at this fraction of eps_cross;
# Frobenius truncation at eps_cross itself costs ~20x eps_cross in max norm
KERNEL_ROUND_FACTOR = 0.1


@dataclass(frozen=True)
class KernelTT:
    """Kernel ``K(w, u)`` as a ``2d``-mode TT: ``d`` cores over ``w`` then ``d`` over ``u``."""

    v_cores: tuple
    u_cores: tuple
    name: str = "custom"

    def __post_init__(self):
        if len(self.v_cores) != len(self.u_cores):
            raise ValueError("v-part and u-part must have the same number of cores")
        # validates the rank chain
        self.as_tt()

    @classmethod
    def from_tt(cls, x: TTTensor, name="custom") -> "KernelTT":
        if x.d % 2:
            raise ValueError(f"kernel tensor needs an even number of modes, got {x.d}")
        d = x.d // 2
        return cls(tuple(x.cores[:d]), tuple(x.cores[d:]), name)

    @property
    def d(self) -> int:
        return len(self.v_cores)

    @property
    def boundary_rank(self) -> int:
        return self.v_cores[-1].shape[2]

    @property
    def ranks(self) -> tuple:
        return self.as_tt().ranks

    def as_tt(self) -> TTTensor:
        return TTTensor(list(self.v_cores) + list(self.u_cores))

    def evaluate(self, w_index, u_index) -> float:
        return self.as_tt()[tuple(w_index) + tuple(u_index)]


def _rank_one_kernel(grid: Grid, value: float, name: str) -> KernelTT:
    c = np.ones((1, grid.N, 1))
    cores = [c * value] + [c] * (2 * grid.d - 1)
    return KernelTT(tuple(cores[: grid.d]), tuple(cores[grid.d:]), name)


def constant_kernel_value(sw, su):
    return np.ones(np.broadcast(sw, su).shape)


def build_constant_kernel(grid: Grid) -> KernelTT:
    return _rank_one_kernel(grid, 1.0, "constant")


def build_zero_kernel(grid: Grid) -> KernelTT:
    return _rank_one_kernel(grid, 0.0, "zero")


def ballistic_kernel_value(sw, su, floor: float = 0.0):
    """Ballistic kernel as a function of the component sums of both particles.

    ``(Sw^(1/3) + Su^(1/3))^2 * sqrt(1/Sw + 1/Su)`` with both sums clipped
    from below at ``floor``.
    """
    sw = np.maximum(np.asarray(sw, dtype=float), floor)
    su = np.maximum(np.asarray(su, dtype=float), floor)
    return (np.cbrt(sw) + np.cbrt(su)) ** 2 * np.sqrt(1.0 / sw + 1.0 / su)


def build_ballistic_kernel(
    grid: Grid,
    cfg: Optional[CrossConfig] = None,
    floor: Optional[float] = None,
) -> KernelTT:
    """TT-cross interpolation of the ballistic kernel on the ``(w, u)`` grid.

    The node ``0`` is on the grid, where the kernel is singular; the component
    sums are clipped at ``floor`` (default ``h / 2``).
    """
    cfg = cfg or CrossConfig()
    floor = 0.5 * grid.h if floor is None else floor
    if not floor > 0:
        raise ValueError(f"regularization floor must be positive, got {floor}")
    v = grid.nodes
    d = grid.d

    def f(idx):
        sw = v[idx[:, :d]].sum(axis=1)
        su = v[idx[:, d:]].sum(axis=1)
        return ballistic_kernel_value(sw, su, floor)

    x = tt_cross_approximate(f, (grid.N,) * (2 * d), cfg)
    x = tt_round(x, KERNEL_ROUND_FACTOR * cfg.eps_cross)
    return KernelTT.from_tt(x, "ballistic")


def build_kernel(name: str, grid: Grid, cfg: Optional[CrossConfig] = None) -> KernelTT:
    if name == "constant":
        return build_constant_kernel(grid)
    if name == "ballistic":
        return build_ballistic_kernel(grid, cfg)
    if name == "zero":
        return build_zero_kernel(grid)
    raise ValueError(f"unknown kernel {name!r}; expected constant, ballistic or zero")


def exponential_rank_one(grid: Grid, kind: str = "initial") -> TTTensor:
    """Grid sampling of ``exp(-v_1 - ... - v_d)``.

    The same function serves as initial condition and as particle source.
    """
    if kind not in ("initial", "source"):
        raise ValueError(f"kind must be 'initial' or 'source', got {kind!r}")
    f = np.exp(-grid.nodes)
    return tt_from_rank_one([f] * grid.d, grid.mode_sizes)


def _i0_series(x):
    q = (0.5 * x) ** 2
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * k)
        total = total + term
    return total


def _i0e_asymptotic(x):
    # e^{-x} I0(x) ~ (2 pi x)^{-1/2} sum_k ((2k-1)!!)^2 / (k! 8^k x^k)
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _ASYMPTOTIC_TERMS):
        term = term * (2 * k - 1) ** 2 / (8.0 * k * x)
        total = total + term
    return total / np.sqrt(2 * np.pi * x)


def bessel_i0e(x):
    """Exponentially scaled ``exp(-|x|) * I0(x)``."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x <= I0_SWITCH
    out[small] = _i0_series(x[small]) * np.exp(-x[small])
    out[~small] = _i0e_asymptotic(x[~small])
    return out if out.ndim else float(out)


def bessel_i0(x):
    """Modified Bessel function of the first kind, order zero."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x <= I0_SWITCH
    out[small] = _i0_series(x[small])
    out[~small] = _i0e_asymptotic(x[~small]) * np.exp(x[~small])
    return out if out.ndim else float(out)


def analytic_constant_2d(v1, v2, t, a=1.0, b=1.0):
    """Exact solution for ``K = 1`` and initial data ``a b exp(-a v1 - b v2)``."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be nonnegative")
    arg = 2.0 * np.sqrt(a * b * v1 * v2 * t / (t + 2.0))
    # exp(-a v1 - b v2) I0(arg) = exp(arg - a v1 - b v2) i0e(arg)
    val = a * b * np.exp(arg - a * v1 - b * v2) * bessel_i0e(arg) / (1.0 + 0.5 * t) ** 2
    return val if np.ndim(val) else float(val)


def analytic_grid_2d(grid: Grid, t: float) -> np.ndarray:
    if grid.d != 2:
        raise ValueError("the exact solution is only available for d = 2")
    v = grid.nodes
    return analytic_constant_2d(v[:, None], v[None, :], t)


def analytic_total_density(t):
    """Total particle density ``2 / (2 + t)`` of the exact solution."""
    out = 2.0 / (2.0 + np.asarray(t, dtype=float))
    return out if out.ndim else float(out)


def _contract(n: TTTensor, weights) -> float:
    v = np.ones(1)
    for c, w in zip(n.cores, weights):
        v = v @ np.tensordot(c, w, axes=(1, 0))
    return float(v[0])


def moment_density(n: TTTensor, grid: Grid) -> float:
    """Trapezoid-rule integral of ``n`` over the grid box."""
    return _contract(n, [grid.quad_weights] * n.d)


def moment_mass(n: TTTensor, grid: Grid) -> float:
    """Trapezoid-rule integral of ``(v_1 + ... + v_d) n``."""
    w = grid.quad_weights
    vw = w * grid.nodes
    total = 0.0
    for mu in range(n.d):
        weights = [w] * n.d
        weights[mu] = vw
        total += _contract(n, weights)
    return total

