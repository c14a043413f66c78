"""Rank-one nonnegative correction ``n + |min n| * ones``."""
from __future__ import annotations

from typing import Optional

from .optim import Extrema, OptimConfig, tt_extrema
from .tt import TTTensor, tt_add, tt_const

__all__ = ["nonnegative_correct"]


def nonnegative_correct(n: TTTensor, cfg: Optional[OptimConfig] = None,
                        extrema: Optional[Extrema] = None):
    """Shift ``n`` up by the magnitude of its minimum if that is negative.

    Returns ``(corrected, applied, shift)``. The shifted tensor is not
    rounded, so every element moves by exactly ``shift`` and the interior
    ranks grow by one.
    """
    if extrema is None:
        extrema = tt_extrema(n, cfg)
    if extrema.min_value >= 0:
        return n, False, 0.0
    shift = -extrema.min_value
    return tt_add(n, tt_const(n.mode_sizes, shift)), True, shift
