"""Explicit Dormand-Prince 5(4) integrator with PI step-size control.

Solutions are sampled on a caller-supplied output grid by cubic Hermite
interpolation between accepted steps, so the grid never constrains the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

# Butcher tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# 5th-order weights minus embedded 4th-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ALPHA = 0.7 / 5  # PI controller exponents (Gustafsson)
_BETA = 0.4 / 5


class IntegrationError(RuntimeError):
    """Step size underflow or step budget exhausted."""

    def __init__(self, message: str, t: float, steps: int):
        self.t = t
        self.steps = steps
        super().__init__(message)


@dataclass
class IntegrationStats:
    accepted: int = 0
    rejected: int = 0
    rhs_evals: int = 0


def _hermite(t0, y0, f0, t1, y1, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def _initial_step(f, t0, y0, f0, rtol, atol, t_span):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_span)
    y1 = y0 + h0 * f0
    f1 = f(t0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, t_span)


def dopri45(
    f: Callable[[float, np.ndarray], np.ndarray],
    y0,
    t_out,
    *,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    max_steps: int = 100_000,
    h0: float | None = None,
) -> tuple[np.ndarray, IntegrationStats]:
    """Integrate ``y' = f(t, y)`` from ``t_out[0]`` and sample at ``t_out``.

    Returns an array of shape ``(len(t_out), len(y0))``.
    """
    t_out = np.asarray(t_out, dtype=float)
    y = np.array(y0, dtype=float)
    out = np.empty((len(t_out), y.size))
    stats = IntegrationStats()
    if len(t_out) == 0:
        return out, stats
    t = float(t_out[0])
    t_end = float(t_out[-1])
    out[0] = y
    k_out = 1
    if t_end <= t or y.size == 0:
        out[k_out:] = y
        return out, stats

    fy = f(t, y)
    stats.rhs_evals += 1
    h = h0 if h0 is not None else _initial_step(f, t, y, fy, rtol, atol, t_end - t)
    stats.rhs_evals += 1
    err_prev = 1e-4
    k = [None] * 7

    while t < t_end:
        if stats.accepted + stats.rejected >= max_steps:
            raise IntegrationError(
                f"maximum number of steps ({max_steps}) exceeded at t={t:.6g}",
                t, stats.accepted)
        h_min = 16 * np.spacing(max(abs(t), abs(t_end)))
        if h < h_min:
            raise IntegrationError(
                f"step size underflow at t={t:.6g} (h={h:.3e}); the problem is too "
                "stiff for the requested tolerance", t, stats.accepted)
        last = t + h >= t_end
        if last:
            h = t_end - t

        k[0] = fy
        for s in range(1, 7):
            acc = y.copy()
            for j, a in enumerate(_A[s]):
                if a:
                    acc += (h * a) * k[j]
            if s == 6:
                y_new = acc
            k[s] = f(t + _C[s] * h, acc)
        stats.rhs_evals += 6

        err_vec = sum(e * kk for e, kk in zip(_E, k) if e) * h
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))

        if err <= 1.0 and np.all(np.isfinite(y_new)):
            t_new = t_end if last else t + h
            f_new = k[6]
            while k_out < len(t_out) and t_out[k_out] <= t_new:
                out[k_out] = _hermite(t, y, fy, t_new, y_new, f_new, t_out[k_out])
                k_out += 1
            t, y, fy = t_new, y_new, f_new
            stats.accepted += 1
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * err ** (-_ALPHA) * err_prev ** _BETA
                factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            err_prev = max(err, 1e-4)
            h *= factor
        else:
            stats.rejected += 1
            if not math.isfinite(err):
                h *= _MIN_FACTOR
            else:
                h *= max(_MIN_FACTOR, _SAFETY * err ** (-1 / 5))
    out[k_out:] = y
    return out, stats


def output_grid(t_end: float, dt_out: float) -> np.ndarray:
    """Multiples of ``dt_out`` in ``[0, t_end]``, with ``t_end`` appended."""
    if t_end < 0 or dt_out <= 0:
        raise ValueError("need t_end >= 0 and dt_out > 0")
    m = int(math.floor(t_end / dt_out + 1e-9))
    grid = [k * dt_out for k in range(m + 1)]
    if t_end - grid[-1] > 1e-9 * max(1.0, t_end):
        grid.append(t_end)
    else:
        grid[-1] = t_end if m else grid[-1]
    return np.array(grid)
