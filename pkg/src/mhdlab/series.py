"""Finite differencing of checkpointed field series in time."""

from __future__ import annotations

import numpy as np

from .grid import Field, fd_weights

__all__ = ["time_derivative_at", "time_derivative_series"]


def time_derivative_at(times, fields, idx: int, order: int = 1, width: int = 3) -> Field:
    """order-th time derivative at checkpoint idx by FD over a window.

    Centered three-point stencils in the interior, one-sided (still second
    order for order = 1) at the ends; wider windows for higher orders.
    """
    n = len(times)
    if n < order + 2:
        raise ValueError(f"need at least {order + 2} checkpoints for d^{order}/dt^{order}")
    w = max(width, order + 2)
    half = w // 2
    lo = max(0, min(idx - half, n - w))
    hi = lo + w
    ts = np.asarray(times[lo:hi], dtype=float)
    wts = fd_weights(ts, float(times[idx]), order)
    g = fields[0].grid
    acc = np.zeros(g.shape, dtype=complex)
    for c, fl in zip(wts, fields[lo:hi]):
        acc += c * fl.data
    return Field(g, acc)


def time_derivative_series(times, fields, order: int = 1, width: int = 3) -> list[Field]:
    return [time_derivative_at(times, fields, i, order, width) for i in range(len(times))]
