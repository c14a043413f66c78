"""Predictor-corrector time stepping of the coagulation equation in TT format."""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .coag import OperatorWorkspace, birth_term_L1, death_term_L2
from .correct import nonnegative_correct
from .cross import CrossConfig
from .kernels import (
    KernelTT,
    analytic_grid_2d,
    analytic_total_density,
    build_kernel,
    exponential_rank_one,
    moment_density,
    moment_mass,
)
from .optim import OptimConfig, tt_extrema
from .tt import Grid, TTTensor, tt_add, tt_full, tt_hadamard, tt_round, tt_scale, tt_zeros

__all__ = [
    "SolverConfig",
    "Diagnostics",
    "SolverError",
    "rhs",
    "step",
    "solve",
    "relative_error_vs_analytic",
    "SCHEMES",
]

# "printed": predictor uses L1 - n L2 (no 1/2 on L1), corrector uses the
# semi-discrete right-hand side; "midpoint": both stages use 1/2 L1 - n L2.
SCHEMES = ("printed", "midpoint")
KERNELS = ("constant", "ballistic", "zero")
# default eps_round as a fraction of eps_cross
EPS_ROUND_FACTOR = 0.1


class SolverError(RuntimeError):
    """A time step failed; carries the last completed step and its state."""

    def __init__(self, message, step: int, state: TTTensor):
        super().__init__(f"step {step}: {message}")
        self.step = step
        self.state = state


@dataclass(frozen=True)
class SolverConfig:
    d: int = 2
    N: int = 200
    v_max: float = 40.0
    tau: float = 0.1
    t_end: float = 5.0
    kernel: str = "constant"
    source_enabled: bool = False
    # steps between correction checks; 0 runs the plain TT method
    correction_interval: int = 5
    # one correction after the last step; None -> same as source_enabled
    final_correction: Optional[bool] = None
    initial: str = "exponential"
    scheme: str = "printed"
    eps_cross: float = 1e-6
    # None -> EPS_ROUND_FACTOR * eps_cross
    eps_round: Optional[float] = None
    max_rank: Optional[int] = None
    cross_max_rank: int = 64
    seed: int = 0
    optim: OptimConfig = field(default_factory=OptimConfig)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.t_end < self.tau:
            raise ValueError(f"t_end ({self.t_end}) must be >= tau ({self.tau})")
        if abs(self.t_end / self.tau - round(self.t_end / self.tau)) > 1e-9 * self.t_end / self.tau:
            raise ValueError(f"t_end ({self.t_end}) is not a multiple of tau ({self.tau})")
        if self.correction_interval < 0:
            raise ValueError("correction_interval must be >= 0")
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}; expected one of {KERNELS}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.initial not in ("exponential", "zero"):
            raise ValueError(f"unknown initial condition {self.initial!r}")
        if not self.eps_cross > 0:
            raise ValueError("eps_cross must be positive")
        if self.eps_round is not None and self.eps_round < 0:
            raise ValueError("eps_round must be nonnegative")
        Grid(self.d, self.N, self.v_max)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.tau))

    @property
    def grid(self) -> Grid:
        return Grid(self.d, self.N, self.v_max)

    @property
    def resolved_eps_round(self) -> float:
        return EPS_ROUND_FACTOR * self.eps_cross if self.eps_round is None else self.eps_round

    @property
    def resolved_final_correction(self) -> bool:
        return self.source_enabled if self.final_correction is None else self.final_correction

    def resolved(self) -> "SolverConfig":
        """Copy with every ``None`` default replaced by its effective value."""
        return dataclasses.replace(
            self,
            eps_round=self.resolved_eps_round,
            final_correction=self.resolved_final_correction,
        )

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class Diagnostics:
    step: int
    time: float
    total_density: float
    total_mass: float
    min_estimate: float
    max_estimate: float
    max_rank: int
    correction_applied: bool
    correction_shift: float
    wall_time_ms: float


def rhs(n: TTTensor, K: KernelTT, q: Optional[TTTensor], grid: Grid,
        ws: OperatorWorkspace, birth_factor: float = 0.5) -> TTTensor:
    """``round(birth_factor * L1(n) - n * L2(n) + q)``."""
    l1 = birth_term_L1(n, K, grid, ws)
    l2 = death_term_L2(n, K, grid, ws)
    out = tt_add(tt_scale(l1, birth_factor), tt_scale(tt_hadamard(n, l2), -1.0))
    if q is not None:
        out = tt_add(out, q)
    return tt_round(out, ws.eps_round, ws.max_rank)


def step(n: TTTensor, K: KernelTT, q: Optional[TTTensor], grid: Grid,
         ws: OperatorWorkspace, tau: float, scheme: str = "printed") -> TTTensor:
    """One predictor-corrector step of size ``tau``."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    predictor_birth = 1.0 if scheme == "printed" else 0.5
    f0 = rhs(n, K, q, grid, ws, predictor_birth)
    n_half = tt_round(tt_add(n, tt_scale(f0, 0.5 * tau)), ws.eps_round, ws.max_rank)
    f1 = rhs(n_half, K, q, grid, ws, 0.5)
    return tt_round(tt_add(n, tt_scale(f1, tau)), ws.eps_round, ws.max_rank)


def setup(cfg: SolverConfig):
    """Grid, kernel, workspace, source and initial state for a run."""
    grid = cfg.grid
    cross_cfg = CrossConfig(eps_cross=cfg.eps_cross, max_rank=cfg.cross_max_rank,
                            seed=cfg.seed)
    K = build_kernel(cfg.kernel, grid, cross_cfg)
    ws = OperatorWorkspace.for_grid(grid, cfg.resolved_eps_round, cfg.max_rank)
    q = exponential_rank_one(grid, "source") if cfg.source_enabled else None
    if cfg.initial == "exponential":
        n0 = exponential_rank_one(grid, "initial")
    else:
        n0 = tt_zeros(cfg.d, cfg.N)
    return grid, K, ws, q, n0


def solve(cfg: SolverConfig, callback: Optional[Callable] = None,
          kernel: Optional[KernelTT] = None):
    """Run the nonnegative TT solver; returns ``(final_state, diagnostics)``.

    Every ``correction_interval`` steps the extrema are searched and the
    state is shifted if its minimum is negative. The extrema are also
    reported for the last step, where an optional post-processing correction
    is applied. ``callback(record, state)`` is called after every step.
    """
    grid, K, ws, q, n = setup(cfg)
    if kernel is not None:
        K = kernel
    s = cfg.correction_interval
    n_steps = cfg.n_steps
    records: List[Diagnostics] = []
    for k in range(1, n_steps + 1):
        t0 = time.perf_counter()
        try:
            n = step(n, K, q, grid, ws, cfg.tau, cfg.scheme)
        except Exception as exc:
            raise SolverError(str(exc), k - 1, n) from exc
        check = s > 0 and k % s == 0
        last = k == n_steps
        applied, shift = False, 0.0
        vmin = vmax = math.nan
        if check or last:
            ext = tt_extrema(n, cfg.optim)
            vmin, vmax = ext.min_value, ext.max_value
            if check or cfg.resolved_final_correction:
                n, applied, shift = nonnegative_correct(n, extrema=ext)
        wall = 1e3 * (time.perf_counter() - t0)
        rec = Diagnostics(
            step=k,
            time=k * cfg.tau,
            total_density=moment_density(n, grid),
            total_mass=moment_mass(n, grid),
            min_estimate=vmin,
            max_estimate=vmax,
            max_rank=n.max_rank,
            correction_applied=applied,
            correction_shift=shift,
            wall_time_ms=wall,
        )
        records.append(rec)
        if callback is not None:
            callback(rec, n)
    return n, records


def relative_error_vs_analytic(n: TTTensor, t: float, grid: Grid,
                               kernel: str = "constant"):
    """``(frob_rel, density_rel)`` against the exact constant-kernel solution."""
    if grid.d != 2 or n.d != 2:
        raise ValueError("the exact solution is only available for d = 2")
    if kernel != "constant":
        raise ValueError(f"the exact solution needs the constant kernel, got {kernel!r}")
    if grid.N > 1600:
        raise ValueError("dense comparison is limited to N <= 1600")
    exact = analytic_grid_2d(grid, t)
    frob = np.linalg.norm(tt_full(n) - exact) / np.linalg.norm(exact)
    ref = analytic_total_density(t)
    dens = abs(moment_density(n, grid) - ref) / ref
    return float(frob), float(dens)
