"""Brute-force dense reference solver for small grids.

Both integrals are summed directly with trapezoid weights, with the kernel
evaluated from its formula. Nothing here goes through TT arithmetic or FFTs,
so it stays independent of the code it checks.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, NamedTuple

import numpy as np

from .integrator import SCHEMES, SolverConfig
from .kernels import ballistic_kernel_value
from .tt import Grid

__all__ = [
    "DenseState",
    "DenseMoments",
    "OracleCapError",
    "DENSE_CAPS",
    "check_cap",
    "kernel_function",
    "dense_initial",
    "dense_source",
    "dense_density",
    "dense_mass",
    "dense_L1",
    "dense_L2",
    "dense_step",
    "dense_solve",
]

# largest N per dimension
DENSE_CAPS = {1: 4096, 2: 64, 3: 24}
_ROW_BLOCK = 256


class OracleCapError(MemoryError):
    pass


@dataclass(frozen=True)
class DenseState:
    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        if self.values.shape != self.grid.mode_sizes:
            raise ValueError(f"shape {self.values.shape} does not match grid {self.grid.mode_sizes}")
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("dense state has non-finite entries")


class DenseMoments(NamedTuple):
    times: np.ndarray
    density: np.ndarray
    mass: np.ndarray


def check_cap(grid: Grid):
    cap = DENSE_CAPS.get(grid.d)
    if cap is None or grid.N > cap:
        raise OracleCapError(
            f"dense oracle supports N <= {cap} for d = {grid.d}" if cap
            else f"dense oracle does not support d = {grid.d}"
        )


def kernel_function(name: str, grid: Grid) -> Callable:
    """``K_fn(w, u)`` on node coordinates with trailing axis of length ``d``."""
    if name == "constant":
        return lambda w, u: np.ones(np.broadcast_shapes(w.shape[:-1], u.shape[:-1]))
    if name == "zero":
        return lambda w, u: np.zeros(np.broadcast_shapes(w.shape[:-1], u.shape[:-1]))
    if name == "ballistic":
        floor = 0.5 * grid.h
        return lambda w, u: ballistic_kernel_value(w.sum(-1), u.sum(-1), floor)
    raise ValueError(f"unknown kernel {name!r}")


def _coords(grid: Grid) -> np.ndarray:
    v = grid.nodes
    return np.stack(np.meshgrid(*([v] * grid.d), indexing="ij"), axis=-1)


def dense_initial(grid: Grid) -> np.ndarray:
    return np.exp(-_coords(grid).sum(-1))


dense_source = dense_initial


def _weights(grid: Grid) -> np.ndarray:
    w = grid.quad_weights
    out = np.ones(())
    for _ in range(grid.d):
        out = np.multiply.outer(out, w)
    return out


def dense_density(n: np.ndarray, grid: Grid) -> float:
    return float(np.sum(_weights(grid) * n))


def dense_mass(n: np.ndarray, grid: Grid) -> float:
    return float(np.sum(_weights(grid) * _coords(grid).sum(-1) * n))


def dense_L1(n, K_fn: Callable, grid: Grid) -> DenseState:
    """``int_0^v K(v - u, u) n(v - u) n(u) du`` summed over ``u <= v``."""
    check_cap(grid)
    n = n.values if isinstance(n, DenseState) else np.asarray(n, dtype=float)
    N, d, h = grid.N, grid.d, grid.h
    X = _coords(grid)
    out = np.zeros(grid.mode_sizes)
    for j in np.ndindex(*grid.mode_sizes):
        if n[j] == 0.0:
            continue
        src = tuple(slice(0, N - jm) for jm in j)
        dst = tuple(slice(jm, N) for jm in j)
        # trapezoid weight per component for v_i >= u_j
        w = np.ones(())
        for jm in j:
            om = np.full(N - jm, h)
            if jm == 0:
                om -= 0.5 * h
            om[0] -= 0.5 * h
            w = np.multiply.outer(w, om)
        k = K_fn(X[src], X[j])
        out[dst] += w * k * n[src] * n[j]
    return DenseState(out, grid)


def dense_L2(n, K_fn: Callable, grid: Grid) -> DenseState:
    """``int K(v, u) n(u) du`` over the whole grid box."""
    check_cap(grid)
    n = n.values if isinstance(n, DenseState) else np.asarray(n, dtype=float)
    X = _coords(grid).reshape(-1, grid.d)
    wn = (_weights(grid) * n).ravel()
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], _ROW_BLOCK):
        rows = X[start:start + _ROW_BLOCK]
        out[start:start + _ROW_BLOCK] = K_fn(rows[:, None, :], X[None, :, :]) @ wn
    return DenseState(out.reshape(grid.mode_sizes), grid)


def _rhs(n, K_fn, q, grid, birth_factor):
    return (birth_factor * dense_L1(n, K_fn, grid).values
            - n * dense_L2(n, K_fn, grid).values + q)


def dense_step(n: np.ndarray, K_fn: Callable, q: np.ndarray, grid: Grid,
               tau: float, scheme: str = "printed") -> np.ndarray:
    """Same predictor-corrector step as the TT integrator, without rounding."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    predictor_birth = 1.0 if scheme == "printed" else 0.5
    n_half = n + 0.5 * tau * _rhs(n, K_fn, q, grid, predictor_birth)
    return n + tau * _rhs(n_half, K_fn, q, grid, 0.5)


def dense_solve(cfg: SolverConfig):
    """Dense trajectory ``[n_0, ..., n_K]`` and its moment series.

    Rounding and nonnegativity corrections are not applied.
    """
    grid = cfg.grid
    check_cap(grid)
    K_fn = kernel_function(cfg.kernel, grid)
    q = dense_source(grid) if cfg.source_enabled else np.zeros(grid.mode_sizes)
    n = dense_initial(grid) if cfg.initial == "exponential" else np.zeros(grid.mode_sizes)
    traj: List[DenseState] = [DenseState(n, grid)]
    for _ in range(cfg.n_steps):
        n = dense_step(n, K_fn, q, grid, cfg.tau, cfg.scheme)
        traj.append(DenseState(n, grid))
    times = cfg.tau * np.arange(cfg.n_steps + 1)
    dens = np.array([dense_density(s.values, grid) for s in traj])
    mass = np.array([dense_mass(s.values, grid) for s in traj])
    return traj, DenseMoments(times, dens, mass)
