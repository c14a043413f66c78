"""PNG figures of solver diagnostics, rendered off-screen."""
from __future__ import annotations

import os
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .integrator import Diagnostics, SolverConfig  # noqa: E402
from .kernels import analytic_total_density  # noqa: E402
from .tt import TTTensor, tt_full  # noqa: E402

__all__ = ["render_run", "render_compare", "STYLE"]

STYLE = {
    "figure.figsize": (6.0, 3.6),
    "figure.dpi": 120,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "savefig.bbox": "tight",
}


def _series(diags: List[Diagnostics], attr: str) -> np.ndarray:
    return np.array([getattr(r, attr) for r in diags], dtype=float)


def _save(fig, path: str) -> str:
    fig.savefig(path)
    plt.close(fig)
    return path


def render_run(out: str, diags: List[Diagnostics], state: Optional[TTTensor],
               cfg: SolverConfig, negatives: Optional[List[float]] = None) -> List[str]:
    """Moments over time, negative fraction if tracked, and the d=2 final state."""
    paths = []
    t = _series(diags, "time")
    with plt.rc_context(STYLE):
        fig, (a0, a1) = plt.subplots(1, 2)
        a0.plot(t, _series(diags, "total_density"), label="TT")
        if cfg.kernel == "constant" and not cfg.source_enabled and cfg.initial == "exponential":
            a0.plot(t, analytic_total_density(t), "k--", lw=0.8, label="exact")
        a0.set_xlabel("t")
        a0.set_ylabel("total density")
        a0.legend()
        a1.plot(t, _series(diags, "total_mass"))
        a1.set_xlabel("t")
        a1.set_ylabel("total mass")
        fig.tight_layout()
        paths.append(_save(fig, os.path.join(out, "moments.png")))

        if negatives:
            fig, ax = plt.subplots()
            ax.plot(t, negatives)
            ax.set_xlabel("t")
            ax.set_ylabel("fraction of negative elements")
            paths.append(_save(fig, os.path.join(out, "negatives.png")))

        if state is not None and state.d == 2:
            v = cfg.grid.nodes
            fig, ax = plt.subplots(figsize=(4.2, 3.6))
            m = ax.pcolormesh(v, v, tt_full(state).T, shading="auto", cmap="viridis")
            fig.colorbar(m, ax=ax)
            ax.set_xlabel("v1")
            ax.set_ylabel("v2")
            ax.set_title(f"n(v, t={diags[-1].time:g})")
            paths.append(_save(fig, os.path.join(out, "state.png")))
    return paths


def render_compare(out: str, d_ntt: List[Diagnostics], d_tt: List[Diagnostics]) -> List[str]:
    """Total density and max rank of the corrected and baseline runs."""
    t = _series(d_ntt, "time")
    with plt.rc_context(STYLE):
        fig, (a0, a1) = plt.subplots(1, 2)
        a0.plot(t, _series(d_ntt, "total_density"), label="nonnegative")
        a0.plot(t, _series(d_tt, "total_density"), "--", label="baseline")
        a0.set_xlabel("t")
        a0.set_ylabel("total density")
        a0.legend()
        a1.step(t, _series(d_ntt, "max_rank"), where="post", label="nonnegative")
        a1.step(t, _series(d_tt, "max_rank"), "--", where="post", label="baseline")
        a1.set_xlabel("t")
        a1.set_ylabel("max rank")
        a1.legend()
        fig.tight_layout()
        return [_save(fig, os.path.join(out, "compare.png"))]
