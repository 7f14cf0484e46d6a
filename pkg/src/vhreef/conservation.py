"""Conserved production-cost functional for symbiotic pairs.

Along the intrinsic-time flow of a two-species pair the quantity

    F = exp(c_x*x + c_y*y) * v**(1 + 1/lam) / u**(1/lam)

is constant, with u = dx/ds and v = dy/ds the production velocities. Two
coefficient choices ship: ``psi_paper`` is a published closed form kept
verbatim for comparison, and ``psi_derived`` is the pair that actually
annihilates dF/ds along the flow (the default; it is validated by the
numeric drift oracle in the test suite).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Trajectory
from .integrator import IntegratorOptions, integrate_second_order
from .production import symbiotic_pair_sode

__all__ = [
    "CostFunctional",
    "psi_paper",
    "psi_derived",
    "cost_functional",
    "evaluate_F",
    "conservation_drift",
    "compare_psi",
    "DriftResult",
    "PsiComparison",
]


@dataclass(frozen=True)
class CostFunctional:
    """Exponent structure and linear psi coefficients of the cost functional."""

    c_x: float
    c_y: float
    a: float  # exponent of the partner velocity, 1 + 1/lam
    b: float  # exponent of the base velocity, 1/lam
    source: str = "derived"

    def __post_init__(self):
        if not (self.a > 1 and self.b > 0):
            raise ValueError("exponents require a > 1 and b > 0 (lam > 0)")
        for v in (self.c_x, self.c_y, self.a, self.b):
            if not np.isfinite(v):
                raise ValueError("coefficients must be finite")
        if self.source not in ("paper", "derived"):
            raise ValueError("source must be 'paper' or 'derived'")


def psi_paper(lam: float, K: float, K1: float, delta: float, delta1: float):
    """Published psi coefficients, kept exactly as printed.

    Note the partner capacity K1 does not enter this form; the comparison
    report keys on that structural fact.
    """
    c_x = lam * delta1 / K + (-K + delta1 * K) / K**2
    c_y = lam * delta / K + (1 + lam) * (-K + delta * K) / K**2
    return c_x, c_y


def psi_derived(lam: float, K: float, K1: float, delta: float, delta1: float):
    """The unique psi coefficients for which dF/ds vanishes along the flow.

    Obtained by expanding dF/ds, substituting the pair system, and zeroing
    the coefficients of u and v.
    """
    c_x = (1 + lam) * delta1 / K1 - 1.0 / K
    c_y = (1 + lam) / K1 - delta / K
    return c_x, c_y


def cost_functional(lam: float, K: float, K1: float, delta: float, delta1: float,
                    variant: str = "derived") -> CostFunctional:
    if variant == "derived":
        c_x, c_y = psi_derived(lam, K, K1, delta, delta1)
    elif variant == "paper":
        c_x, c_y = psi_paper(lam, K, K1, delta, delta1)
    else:
        raise ValueError("variant must be 'paper' or 'derived'")
    return CostFunctional(c_x=c_x, c_y=c_y, a=1 + 1 / lam, b=1 / lam, source=variant)


def evaluate_F(x, y, u, v, f: CostFunctional):
    """F = exp(c_x*x + c_y*y) * v**a / u**b; velocities must be positive."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(u <= 0) or np.any(v <= 0):
        raise ValueError("cost functional is undefined at nonpositive velocities")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.exp(f.c_x * x + f.c_y * y) * v**f.a / u**f.b


@dataclass(frozen=True)
class DriftResult:
    max_rel_drift: float
    f_series: np.ndarray
    times: np.ndarray

    def to_dict(self) -> dict:
        return {
            "max_rel_drift": self.max_rel_drift,
            "f_initial": float(self.f_series[0]),
            "f_final": float(self.f_series[-1]),
        }


def conservation_drift(traj_s: Trajectory, f: CostFunctional) -> DriftResult:
    """Relative drift of F along an intrinsic-time pair trajectory."""
    if traj_s.n != 2:
        raise ValueError("cost functional applies to two-species pairs")
    if traj_s.velocities is None:
        raise ValueError("trajectory lacks velocities")
    u = traj_s.velocities[:, 0]
    v = traj_s.velocities[:, 1]
    series = evaluate_F(traj_s.states[:, 0], traj_s.states[:, 1], u, v, f)
    f0 = series[0]
    drift = float(np.max(np.abs(series - f0)) / abs(f0))
    return DriftResult(max_rel_drift=drift, f_series=series, times=traj_s.times)


_TIGHT = dict(rel_tol=1e-11, abs_tol=1e-13)


def pair_flow(lam: float, K: float, K1: float, delta: float, delta1: float,
              v0=(1.0, 1.0), horizon: float = 2.0, opts: IntegratorOptions | None = None,
              cross_sign: int = +1) -> Trajectory:
    """Integrate the intrinsic-time pair system from t=0 to t=horizon.

    The s-span starts at s = 1/lam (the image of t = 0), where the
    velocities equal the initial populations.
    """
    sode = symbiotic_pair_sode(lam, K, delta, K1, delta1, cross_sign=cross_sign)
    s0 = 1.0 / lam
    s1 = np.exp(lam * horizon) / lam
    if opts is None:
        opts = IntegratorOptions(t_span=(s0, s1), sample_count=801, **_TIGHT)
    return integrate_second_order(sode, (0.0, 0.0), v0, opts)


@dataclass(frozen=True)
class PsiComparison:
    """Side-by-side drift report for the two psi coefficient choices."""

    lam: float
    K: float
    K1: float
    delta: float
    delta1: float
    paper_c: tuple[float, float]
    derived_c: tuple[float, float]
    paper_drift: float
    derived_drift: float
    drifts_disagree: bool
    paper_depends_on_k1: bool
    derived_depends_on_k1: bool

    def to_dict(self) -> dict:
        return {
            "params": {"lam": self.lam, "K": self.K, "K1": self.K1,
                       "delta": self.delta, "delta1": self.delta1},
            "paper": {"c_x": self.paper_c[0], "c_y": self.paper_c[1],
                      "max_rel_drift": self.paper_drift,
                      "depends_on_partner_capacity": self.paper_depends_on_k1},
            "derived": {"c_x": self.derived_c[0], "c_y": self.derived_c[1],
                        "max_rel_drift": self.derived_drift,
                        "depends_on_partner_capacity": self.derived_depends_on_k1},
            "drifts_disagree_beyond_10x": self.drifts_disagree,
        }


def compare_psi(lam: float, K: float, K1: float, delta: float, delta1: float,
                v0=(1.0, 1.0), horizon: float = 2.0,
                opts: IntegratorOptions | None = None) -> PsiComparison:
    """Measure both coefficient choices on one flow and flag 10x disagreement."""
    traj = pair_flow(lam, K, K1, delta, delta1, v0=v0, horizon=horizon, opts=opts)
    fp = cost_functional(lam, K, K1, delta, delta1, "paper")
    fd = cost_functional(lam, K, K1, delta, delta1, "derived")
    dp = conservation_drift(traj, fp).max_rel_drift
    dd = conservation_drift(traj, fd).max_rel_drift
    lo, hi = sorted((dp, dd))
    disagree = hi > 10.0 * max(lo, 1e-300)

    def k1_sensitive(fn) -> bool:
        base = fn(lam, K, K1, delta, delta1)
        other = fn(lam, K, 2.0 * K1, delta, delta1)
        return bool(max(abs(base[0] - other[0]), abs(base[1] - other[1])) > 0)

    return PsiComparison(
        lam=lam, K=K, K1=K1, delta=delta, delta1=delta1,
        paper_c=psi_paper(lam, K, K1, delta, delta1),
        derived_c=psi_derived(lam, K, K1, delta, delta1),
        paper_drift=dp, derived_drift=dd, drifts_disagree=disagree,
        paper_depends_on_k1=k1_sensitive(psi_paper),
        derived_depends_on_k1=k1_sensitive(psi_derived),
    )
