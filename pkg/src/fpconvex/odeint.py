"""Dormand-Prince 5(4) integrator with a state-admissibility guard.

Steps whose result fails ``admissible`` (e.g. a density leaving the open simplex)
are rejected and the step size halved, rather than projected back.
"""

from __future__ import annotations

import numpy as np

from .errors import IntegrationError

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
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_LOW = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B - _B_LOW


def dopri_step(fun, t, y, dt, k0=None):
    """One Dormand-Prince step; returns (y_new, error_estimate, k_last)."""
    k = [fun(t, y) if k0 is None else k0]
    for i in range(1, 7):
        yi = y + dt * sum(a * kj for a, kj in zip(_A[i], k) if a != 0.0)
        k.append(fun(t + _C[i] * dt, yi))
    y_new = y + dt * sum(b * kj for b, kj in zip(_B, k) if b != 0.0)
    err = dt * sum(e * kj for e, kj in zip(_E, k) if e != 0.0)
    return y_new, err, k[-1]


def integrate_adaptive(fun, t0, y0, t_end, rtol=1e-9, atol=1e-9, admissible=None,
                       t_eval=None, dt0=None, max_steps=1_000_000, min_step=None):
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``t_end``.

    If ``t_eval`` is None every accepted step is recorded; otherwise steps are
    shortened to land exactly on the requested times (no interpolation).
    Returns ``(ts, ys)``. Raises :class:`IntegrationError` with the last accepted
    state when the step size underflows or ``max_steps`` is exceeded.
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    t_end = float(t_end)
    direction = 1.0 if t_end >= t else -1.0
    span = abs(t_end - t)
    if min_step is None:
        min_step = 1e-14 * max(span, 1.0)
    if t_eval is None:
        stops = np.array([t_end])
        record_all = True
    else:
        stops = np.asarray(t_eval, dtype=float)
        record_all = False
    ts, ys = [t], [y.copy()]
    if span == 0.0:
        return np.array(ts), np.array(ys)

    k0 = fun(t, y)
    if dt0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.sqrt(np.mean((y / scale) ** 2))
        d1 = np.sqrt(np.mean((k0 / scale) ** 2))
        dt = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        dt = min(dt, span)
    else:
        dt = abs(dt0)

    # requested times at or before t0 are covered by the initial record
    stop_idx = 0
    while stop_idx < len(stops) and direction * (stops[stop_idx] - t) <= 0:
        stop_idx += 1

    for _ in range(max_steps):
        if stop_idx >= len(stops):
            break
        target = stops[stop_idx]
        remaining = abs(target - t)
        step = min(dt, remaining)
        lands = step == remaining
        y_new, err, k_last = dopri_step(fun, t, y, direction * step, k0)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = np.sqrt(np.mean((err / scale) ** 2))
        ok = np.all(np.isfinite(y_new)) and err_norm <= 1.0
        if ok and admissible is not None and not admissible(y_new):
            dt = 0.5 * step
            if dt < min_step:
                raise IntegrationError(f"step size underflow at t={t:.6g} (admissibility)", t, y)
            continue
        if ok:
            t = target if lands else t + direction * step
            y = y_new
            k0 = k_last
            if record_all or lands:
                ts.append(t)
                ys.append(y.copy())
            if lands:
                stop_idx += 1
            factor = 5.0 if err_norm == 0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
            dt = step * factor
        else:
            factor = 0.2 if not np.isfinite(err_norm) else max(0.2, 0.9 * err_norm ** -0.2)
            dt = step * factor
            if dt < min_step:
                raise IntegrationError(f"step size underflow at t={t:.6g}", t, y)
    else:
        raise IntegrationError(f"exceeded {max_steps} steps at t={t:.6g}", t, y)
    return np.array(ts), np.array(ys)


def rk4_fixed(fun, t0, y0, dt, steps):
    """Classical fixed-step RK4; returns the final state."""
    y = np.array(y0, dtype=float)
    t = t0
    for _ in range(steps):
        k1 = fun(t, y)
        k2 = fun(t + dt / 2, y + dt / 2 * k1)
        k3 = fun(t + dt / 2, y + dt / 2 * k2)
        k4 = fun(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    return y
