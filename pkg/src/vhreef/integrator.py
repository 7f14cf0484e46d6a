"""Adaptive explicit Runge-Kutta integration with dense output.

The stepper is the Dormand-Prince 5(4) embedded pair with PI step-size
control. Accepted steps are interpolated by cubic Hermite polynomials
(4th-order accurate) onto a uniform output grid, which downstream
quadrature and finite-difference checks rely on.

Population runs support extinction handling: when a component drops below
``extinction_threshold`` while decreasing, it is clamped to zero and the
crossing is recorded as an :class:`~vhreef.core.EventRecord`. Fields of
logistic type keep a clamped component at exactly zero afterwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .core import EventRecord, QuadraticSode, State, Trajectory

__all__ = ["IntegratorOptions", "IntegrationError", "integrate", "integrate_second_order"]

Field = Callable[[float, np.ndarray], np.ndarray]


class IntegrationError(RuntimeError):
    """Step-size underflow or a non-finite state during integration."""


@dataclass(frozen=True)
class IntegratorOptions:
    """Tolerances, span, and output-grid settings for one integration run.

    ``fixed_step`` disables adaptivity (used for convergence studies);
    ``terminal_species`` stops the run at that species' extinction event.
    """

    t_span: tuple[float, float]
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = math.inf
    sample_count: int = 1001
    extinction_threshold: float = 1e-8
    fixed_step: float | None = None
    terminal_species: int | None = None
    max_steps: int = 1_000_000

    def __post_init__(self):
        t0, t1 = self.t_span
        if not (math.isfinite(t0) and math.isfinite(t1) and t0 < t1):
            raise ValueError("t_span must be finite with start < end")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.max_step <= 0:
            raise ValueError("max_step must be > 0")
        if self.sample_count < 2:
            raise ValueError("sample_count must be >= 2")
        if self.extinction_threshold < 0:
            raise ValueError("extinction_threshold must be >= 0")
        if self.fixed_step is not None and self.fixed_step <= 0:
            raise ValueError("fixed_step must be > 0")


# Dormand-Prince 5(4) tableau. B propagates the 5th-order solution; E gives
# the embedded error estimate (b5 - b4). Stage 7 is FSAL.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
# PI controller exponents for a 5th-order pair
_ALPHA = 0.7 / 5.0
_BETA = 0.4 / 5.0


def _initial_step(field: Field, t0: float, y0: np.ndarray, f0: np.ndarray,
                  scale: np.ndarray, t_end: float) -> float:
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, t_end - t0)
    y1 = y0 + h0 * f0
    f1 = field(t0 + h0, y1)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t_end - t0)


def _hermite(theta: np.ndarray, y0: np.ndarray, f0: np.ndarray,
             y1: np.ndarray, f1: np.ndarray, h: float) -> np.ndarray:
    th = theta[:, None]
    h00 = 2 * th**3 - 3 * th**2 + 1
    h10 = th**3 - 2 * th**2 + th
    h01 = -2 * th**3 + 3 * th**2
    h11 = th**3 - th**2
    return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1


def _crossing_time(t: float, h: float, y0, f0, y1, f1, comp: int, level: float) -> float:
    """Bisect the Hermite interpolant for component `comp` falling to `level`."""
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        val = _hermite(np.array([mid]), y0, f0, y1, f1, h)[0, comp]
        if val > level:
            lo = mid
        else:
            hi = mid
    return t + h * 0.5 * (lo + hi)


def integrate(field: Field, y0, opts: IntegratorOptions, *, clamp: bool = True) -> Trajectory:
    """Integrate dy/dt = field(t, y) over opts.t_span onto a uniform grid.

    Local error is controlled per component against
    max(abs_tol, rel_tol * |y|). Raises :class:`IntegrationError` on
    step-size underflow or non-finite states (typical of blow-up).
    """
    t0, t_end = opts.t_span
    y = np.array(y0, dtype=float)
    if y.ndim == 0:
        y = y[None]
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state must be finite")
    n = y.shape[0]
    threshold = opts.extinction_threshold

    ts_out = np.linspace(t0, t_end, opts.sample_count)
    ys_out = np.empty((opts.sample_count, n))
    events: list[EventRecord] = []

    t = t0
    f = field(t, y)

    if clamp and threshold > 0:
        for i in range(n):
            if y[i] < threshold and (y[i] < 0 or f[i] < 0):
                y[i] = 0.0
                events.append(EventRecord(species=i, time=t, direction=-1))
        if events:
            f = field(t, y)
    ys_out[0] = y
    next_out = 1

    scale0 = np.maximum(opts.abs_tol, opts.rel_tol * np.abs(y))
    if opts.fixed_step is not None:
        h = min(opts.fixed_step, t_end - t0)
    else:
        h = min(_initial_step(field, t0, y, f, scale0, t_end), opts.max_step)

    k = np.empty((7, n))
    err_prev = 1.0
    rejected = False
    terminal_hit = False
    t_stop = t_end
    steps = 0

    while t < t_end and not terminal_hit:
        steps += 1
        if steps > opts.max_steps:
            raise IntegrationError(f"exceeded {opts.max_steps} steps")
        h = min(h, opts.max_step, t_end - t)
        if opts.fixed_step is not None:
            h = min(opts.fixed_step, t_end - t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t!r}")

        k[0] = f
        for s in range(1, 7):
            k[s] = field(t + _C[s] * h, y + h * (_A[s] @ k[:s]))
        y_new = y + h * (_B @ k)
        f_new = k[6]  # FSAL: stage 7 is field(t + h, y_new)

        if not np.all(np.isfinite(y_new)):
            if opts.fixed_step is not None:
                raise IntegrationError(f"non-finite state at t={t + h!r}")
            h *= 0.5
            rejected = True
            continue

        if opts.fixed_step is None:
            err = h * (_E @ k)
            scale = np.maximum(opts.abs_tol,
                               opts.rel_tol * np.maximum(np.abs(y), np.abs(y_new)))
            err_norm = float(np.max(np.abs(err) / scale))
            if err_norm > 1.0:
                h *= max(_MIN_FACTOR, _SAFETY * err_norm ** -0.2)
                rejected = True
                continue
        else:
            err_norm = 0.0

        # accepted: fill output samples inside (t, t+h]
        t_new = t + h
        fuzz = 1e-12 * max(1.0, abs(t_new))
        hi = next_out
        while hi < opts.sample_count and ts_out[hi] <= t_new + fuzz:
            hi += 1
        if hi > next_out:
            theta = (ts_out[next_out:hi] - t) / h
            ys_out[next_out:hi] = _hermite(theta, y, f, y_new, f_new, h)

        clamped = []
        if clamp and threshold > 0:
            for i in range(n):
                fi = f_new[i]
                if y_new[i] < threshold and (y_new[i] < 0 or fi < 0):
                    level = min(threshold, max(y[i], 0.0))
                    if y[i] >= threshold:
                        tc = _crossing_time(t, h, y, f, y_new, f_new, i, threshold)
                    else:
                        tc = t_new
                    y_new[i] = 0.0
                    clamped.append(i)
                    events.append(EventRecord(species=i, time=tc, direction=-1))
                    # keep samples of an extinct component nonnegative
                    if hi > next_out:
                        col = ys_out[next_out:hi, i]
                        col[ts_out[next_out:hi] >= tc] = 0.0
                        np.maximum(col, 0.0, out=col)
                    if opts.terminal_species == i:
                        terminal_hit = True
                        t_stop = tc
            if clamped:
                f_new = field(t_new, y_new)

        next_out = hi
        t = t_new
        y = y_new
        f = f_new

        if opts.fixed_step is None:
            if err_norm == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * err_norm ** -_ALPHA * err_prev ** _BETA
                factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            if rejected:
                factor = min(1.0, factor)
            h *= factor
            err_prev = max(err_norm, 1e-10)
            rejected = False

    if terminal_hit:
        keep = ts_out < t_stop - 1e-12 * max(1.0, abs(t_stop))
        keep_n = int(np.sum(keep))
        times = np.append(ts_out[:keep_n], t_stop)
        states = np.vstack([ys_out[:keep_n], y])
        return Trajectory(times=times, states=states, time_scale="t",
                          events=tuple(events))

    ys_out[-1] = y  # endpoint carries the integrated state, not an interpolant
    return Trajectory(times=ts_out, states=ys_out, time_scale="t",
                      events=tuple(events))


def integrate_second_order(sode: QuadraticSode, x0, v0,
                           opts: IntegratorOptions, time_scale: str = "s") -> Trajectory:
    """Integrate x'' = -Gamma^i_jk x'^j x'^k by reduction to first order.

    Initial velocities must be positive (they stand for population-derived
    rates). Returns a trajectory carrying both positions and velocities.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    v0 = np.atleast_1d(np.asarray(v0, dtype=float))
    n = sode.n
    if x0.shape != (n,) or v0.shape != (n,):
        raise ValueError("x0/v0 dimension mismatch with system")
    if np.any(v0 <= 0):
        raise ValueError("initial velocities must be > 0")
    gamma = sode.gamma

    def field(t, z):
        v = z[n:]
        out = np.empty(2 * n)
        out[:n] = v
        out[n:] = -gamma.dot(v).dot(v)
        return out

    z0 = np.concatenate([x0, v0])
    traj = integrate(field, z0, opts, clamp=False)
    return Trajectory(times=traj.times, states=traj.states[:, :n],
                      velocities=traj.states[:, n:], time_scale=time_scale)


def options_with(opts: IntegratorOptions, **changes) -> IntegratorOptions:
    """Return a copy of `opts` with the given fields replaced."""
    return replace(opts, **changes)
