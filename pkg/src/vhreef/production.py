"""Production variables and the intrinsic-time form of VH systems.

Cumulative production x^i(t) = k_i * integral of N^i plus its start value
is computed by composite Simpson quadrature on the trajectory's uniform
grid. The substitution s = exp(lam*t)/lam turns the population equations
into a purely quadratic second-order system in s with the same Gamma
coefficients; positions are the productions and velocities are
dx^i/ds = N^i/(lam*s).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import QuadraticSode, Trajectory, VhSystem

__all__ = [
    "TimeMap",
    "production_curve",
    "to_intrinsic_time",
    "transform_trajectory",
    "second_order_residual",
    "symbiotic_pair_sode",
]


@dataclass(frozen=True)
class TimeMap:
    """Strictly increasing map between physical time t and intrinsic time s.

    Forward direction ("t_to_s"): s = exp(lam*t)/lam, so s > 0 always and
    t = 0 maps to s = 1/lam.
    """

    lam: float
    direction: str = "t_to_s"

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError("lam must be finite and > 0")
        if self.direction not in ("t_to_s", "s_to_t"):
            raise ValueError("direction must be 't_to_s' or 's_to_t'")

    def __call__(self, value):
        if self.direction == "t_to_s":
            return self.to_s(value)
        return self.to_t(value)

    def to_s(self, t):
        return np.exp(self.lam * np.asarray(t, dtype=float)) / self.lam

    def to_t(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s <= 0):
            raise ValueError("intrinsic time must be > 0")
        return np.log(self.lam * s) / self.lam

    def inverse(self) -> "TimeMap":
        other = "s_to_t" if self.direction == "t_to_s" else "t_to_s"
        return TimeMap(self.lam, other)


def _uniform_spacing(times: np.ndarray) -> float:
    dt = np.diff(times)
    h = dt[0]
    if not np.allclose(dt, h, rtol=1e-8, atol=1e-12 * max(1.0, abs(h))):
        raise ValueError("trajectory grid must be uniform")
    return float(h)


def _cumulative_simpson(y: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral of samples y on a uniform grid, O(h^4) per node.

    Each interval is integrated under the parabola through the three
    points of its Simpson pair, so even-node values match the classic
    composite rule.
    """
    m = y.shape[0]
    if m < 3:
        raise ValueError("need at least 3 samples for Simpson quadrature")
    inc = np.empty((m - 1,) + y.shape[1:])
    for j in range(m - 1):
        if j % 2 == 0 and j + 2 <= m - 1:
            inc[j] = h * (5.0 * y[j] + 8.0 * y[j + 1] - y[j + 2]) / 12.0
        else:
            inc[j] = h * (-y[j - 1] + 8.0 * y[j] + 5.0 * y[j + 1]) / 12.0
    out = np.zeros_like(y)
    np.cumsum(inc, axis=0, out=out[1:])
    return out


def production_curve(traj: Trajectory, k, x0=None) -> Trajectory:
    """Attach cumulative production samples x^i to a population trajectory.

    ``k`` are per-capita production rates (scalar or per species); ``x0``
    are starting productions (default 0). The grid must be uniform.
    """
    h = _uniform_spacing(traj.times)
    n = traj.n
    k = np.broadcast_to(np.asarray(k, dtype=float), (n,))
    if np.any(k <= 0):
        raise ValueError("production rates must be > 0")
    start = np.zeros(n) if x0 is None else np.broadcast_to(np.asarray(x0, dtype=float), (n,))
    cums = _cumulative_simpson(traj.states, h)
    prods = start + k * cums
    return Trajectory(times=traj.times, states=traj.states, time_scale=traj.time_scale,
                      velocities=traj.velocities, productions=prods, events=traj.events)


def to_intrinsic_time(v: VhSystem) -> tuple[QuadraticSode, TimeMap]:
    """Reparametrize a VH system by s = exp(lam*t)/lam.

    Requires a common growth rate across species and unit production
    rates; under the substitution the linear growth term drops out and the
    Gamma coefficients carry over unchanged.
    """
    lam = float(v.lam[0])
    if not np.all(v.lam == lam):
        raise ValueError("intrinsic-time form needs a common growth rate")
    if not np.all(v.prod_rate == 1.0):
        raise ValueError("intrinsic-time form assumes unit production rates")
    return v.sode, TimeMap(lam)


def transform_trajectory(traj: Trajectory, tm: TimeMap) -> Trajectory:
    """Map a physical-time trajectory with productions into intrinsic time.

    Positions are the production samples; velocities follow from
    dx^i/ds = N^i / (lam * s).
    """
    if traj.time_scale != "t":
        raise ValueError("expected a physical-time trajectory")
    if traj.productions is None:
        raise ValueError("trajectory lacks production samples")
    s = tm.to_s(traj.times)
    vel = traj.states / (tm.lam * s[:, None])
    events = tuple(
        type(e)(species=e.species, time=float(tm.to_s(e.time)), direction=e.direction)
        for e in traj.events
    )
    return Trajectory(times=s, states=traj.productions, time_scale="s",
                      velocities=vel, events=events)


def second_order_residual(traj_s: Trajectory, sode: QuadraticSode) -> float:
    """Max norm of d2x/ds2 + Gamma x' x' over interior samples.

    The second derivative is taken by 3-point finite differences of the
    position samples (grid may be non-uniform); velocities must be present
    for the quadratic term. Shrinks as O(h^2) on smoothly graded grids.
    """
    if traj_s.velocities is None:
        raise ValueError("trajectory lacks velocities")
    s = traj_s.times
    x = traj_s.states
    if len(s) < 3:
        raise ValueError("need at least 3 samples")
    h1 = (s[1:-1] - s[:-2])[:, None]
    h2 = (s[2:] - s[1:-1])[:, None]
    d2x = 2.0 * (h1 * x[2:] - (h1 + h2) * x[1:-1] + h2 * x[:-2]) / (h1 * h2 * (h1 + h2))
    quad = np.einsum("ijk,mj,mk->mi", sode.gamma, traj_s.velocities[1:-1],
                     traj_s.velocities[1:-1])
    return float(np.max(np.abs(d2x + quad)))


def symbiotic_pair_sode(lam: float, K: float, delta: float,
                        K_partner: float, delta_partner: float,
                        cross_sign: int = +1) -> QuadraticSode:
    """Intrinsic-time coefficients of a two-species interacting pair.

    With ``cross_sign=+1`` the cross terms enter the second-order system
    with coefficients +delta*lam/K (the convention the conserved-cost
    analysis assumes); with ``cross_sign=-1`` they carry the sign obtained
    by rewriting the mutualistic first-order model, where beneficial
    interactions give negative Gamma cross entries.
    """
    if cross_sign not in (+1, -1):
        raise ValueError("cross_sign must be +1 or -1")
    for name, val in (("lam", lam), ("K", K), ("K_partner", K_partner)):
        if not (np.isfinite(val) and val > 0):
            raise ValueError(f"{name} must be finite and > 0")
    g = np.zeros((2, 2, 2))
    g[0, 0, 0] = lam / K
    g[0, 0, 1] = g[0, 1, 0] = cross_sign * delta * lam / (2.0 * K)
    g[1, 1, 1] = lam / K_partner
    g[1, 0, 1] = g[1, 1, 0] = cross_sign * delta_partner * lam / (2.0 * K_partner)
    return QuadraticSode(g)
