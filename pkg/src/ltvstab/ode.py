"""Embedded Runge-Kutta integration (Dormand-Prince 5(4)).

The fifth-order solution is propagated; the embedded fourth-order solution
only drives the step-size controller.  Integration stops early when a state
component leaves the escape threshold (finite-time blow-up) or when the
step size collapses below floating point resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# Dormand & Prince (1980) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
ESCAPE_THRESHOLD = 1e8


@dataclass
class OdeResult:
    t: np.ndarray
    y: np.ndarray
    status: str  # "ok", "escaped", "underflow", "max_steps"
    message: str = ""
    nfev: int = 0
    rejected: int = 0
    escape_time: float | None = None

    @property
    def success(self) -> bool:
        return self.status == "ok"

    @property
    def t_final(self) -> float:
        return float(self.t[-1])


@dataclass
class _Stepper:
    rhs: Callable
    nfev: int = 0
    k: list = field(default_factory=list)

    def step(self, t, y, f0, h):
        k = [f0]
        for s in range(1, 7):
            dy = sum(a * ks for a, ks in zip(_A[s], k) if a != 0.0)
            k.append(np.asarray(self.rhs(t + _C[s] * h, y + h * dy), dtype=float))
        self.nfev += 6
        y5 = y + h * sum(b * ks for b, ks in zip(_B5, k) if b != 0.0)
        err = h * sum(e * ks for e, ks in zip(_E, k))
        # FSAL: k[6] is f(t + h, y5)
        return y5, err, k[6]


def _initial_step(rhs, t0, y0, f0, direction, rtol, atol, span):
    scale = atol + np.abs(y0) * rtol
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + direction * h0 * f0
    f1 = np.asarray(rhs(t0 + direction * h0, y1), dtype=float)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0: Sequence[float] | np.ndarray,
    t_end: float,
    rtol: float = 1e-8,
    atol: float = 1e-12,
    max_step: float = np.inf,
    first_step: float | None = None,
    escape_components: Sequence[int] | None = None,
    escape_threshold: float = ESCAPE_THRESHOLD,
    fixed_step: float | None = None,
    max_steps: int = 2_000_000,
    tstops: Sequence[float] | None = None,
) -> OdeResult:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t_end``.

    ``escape_components`` lists state indices monitored for blow-up; the
    run stops with status ``"escaped"`` once one exceeds ``escape_threshold``
    in absolute value.  ``fixed_step`` disables adaptivity.  ``tstops`` are
    times that must appear on the output grid.
    """
    y = np.array(y0, dtype=float).reshape(-1)
    t = float(t0)
    t_end = float(t_end)
    if t_end <= t:
        raise ValueError("t_end must exceed t0")
    span = t_end - t
    stepper = _Stepper(rhs)
    f = np.asarray(rhs(t, y), dtype=float)
    stepper.nfev += 1
    esc = None if escape_components is None else np.asarray(escape_components, dtype=int)
    stops = sorted(s for s in (tstops or []) if t < s < t_end) + [t_end]
    stop_i = 0

    ts = [t]
    ys = [y.copy()]
    rejected = 0
    status, message, escape_time = "ok", "", None

    if fixed_step is not None:
        h = float(fixed_step)
    elif first_step is not None:
        h = float(first_step)
    else:
        h = _initial_step(rhs, t, y, f, 1.0, rtol, atol, span)
    h = min(h, max_step)

    steps = 0
    while t < t_end:
        if steps >= max_steps:
            status, message = "max_steps", f"step budget exhausted at t={t:g}"
            break
        target = stops[stop_i]
        h_try = min(h, target - t)
        last = h_try >= target - t
        min_h = 16 * np.spacing(max(abs(t), 1.0))
        if h_try < min_h and not last:
            status, message = "underflow", f"step size underflow at t={t:g}"
            break
        y_new, err, f_new = stepper.step(t, y, f, h_try)
        if not np.all(np.isfinite(y_new)):
            if esc is not None:
                status, escape_time = "escaped", t
                message = f"non-finite state near t={t:g}"
                break
            err_norm = np.inf
        elif fixed_step is not None:
            err_norm = 0.0
        else:
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.max(np.abs(err) / scale))
        if err_norm <= 1.0:
            t = target if last else t + h_try
            if last:
                stop_i += 1
            y, f = y_new, f_new
            ts.append(t)
            ys.append(y.copy())
            steps += 1
            if esc is not None and np.any(np.abs(y[esc]) > escape_threshold):
                status, escape_time = "escaped", t
                message = f"|y| exceeded {escape_threshold:g} at t={t:g}"
                break
            if fixed_step is None and not last:
                fac = MAX_FACTOR if err_norm == 0.0 else min(MAX_FACTOR, SAFETY * err_norm ** -0.2)
                h = min(max_step, h_try * fac)
        else:
            rejected += 1
            fac = MIN_FACTOR if not np.isfinite(err_norm) else max(MIN_FACTOR, SAFETY * err_norm ** -0.2)
            h = h_try * fac
            if h < min_h:
                status, message = "underflow", f"step size underflow at t={t:g}"
                if esc is not None and np.any(np.abs(y[esc]) > np.sqrt(escape_threshold)):
                    status, escape_time = "escaped", t
                break

    return OdeResult(
        t=np.array(ts),
        y=np.array(ys),
        status=status,
        message=message,
        nfev=stepper.nfev,
        rejected=rejected,
        escape_time=escape_time,
    )
