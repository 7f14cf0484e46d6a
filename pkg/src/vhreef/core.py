"""Domain types for interacting-population models.

Communities of n species with logistic self-limitation and pairwise
interactions are represented three ways:

* ``ModelParams`` -- growth rates, carrying capacities, and a signed
  interaction matrix (positive entry = beneficial effect).
* ``QuadraticSode`` -- the same dynamics rewritten with constant
  coefficients, dN/dt = -Gamma^i_jk N^j N^k + lambda_i N^i.
* ``VhSystem`` -- the Volterra-Hamilton form, which augments the
  population equations with cumulative production variables.

All types are immutable value objects: arrays are copied at construction
and marked read-only, so instances are safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelParams",
    "QuadraticSode",
    "VhSystem",
    "State",
    "Trajectory",
    "EventRecord",
    "vh_from_params",
    "rhs",
]


def _frozen_array(values, shape=None, name="array") -> np.ndarray:
    a = np.array(values, dtype=float)
    if shape is not None and a.shape != shape:
        raise ValueError(f"{name} has shape {a.shape}, expected {shape}")
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ModelParams:
    """Growth, capacity, and interaction parameters of an n-species community.

    ``interaction[i, j]`` is the dimensionless signed effect of species j on
    species i (positive = beneficial, negative = harmful); diagonal entries
    are ignored and stored as zero.
    """

    lam: np.ndarray
    capacity: np.ndarray
    interaction: np.ndarray

    def __post_init__(self):
        lam = np.atleast_1d(np.array(self.lam, dtype=float))
        n = lam.shape[0]
        if n < 1:
            raise ValueError("need at least one species")
        cap = _frozen_array(np.atleast_1d(self.capacity), (n,), "capacity")
        inter = np.array(self.interaction, dtype=float)
        if inter.shape != (n, n):
            raise ValueError(f"interaction has shape {inter.shape}, expected {(n, n)}")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ValueError("growth rates must be finite and > 0")
        if not np.all(np.isfinite(cap)) or np.any(cap <= 0):
            raise ValueError("carrying capacities must be finite and > 0")
        if not np.all(np.isfinite(inter)):
            raise ValueError("interaction coefficients must be finite")
        np.fill_diagonal(inter, 0.0)
        lam.flags.writeable = False
        inter.flags.writeable = False
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "capacity", cap)
        object.__setattr__(self, "interaction", inter)

    @property
    def n(self) -> int:
        return self.lam.shape[0]


@dataclass(frozen=True)
class QuadraticSode:
    """Constant coefficients Gamma^i_jk of a quadratic second-order system.

    The coefficients are symmetrized over the last two indices at
    construction, so ``gamma[i, j, k] == gamma[i, k, j]`` holds exactly.
    """

    gamma: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float)
        if g.ndim != 3 or g.shape[0] != g.shape[1] or g.shape[1] != g.shape[2]:
            raise ValueError(f"gamma must be (n, n, n), got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("gamma entries must be finite")
        g = 0.5 * (g + g.swapaxes(1, 2))
        g.flags.writeable = False
        object.__setattr__(self, "gamma", g)

    @property
    def n(self) -> int:
        return self.gamma.shape[0]

    def spray(self, velocity: np.ndarray) -> np.ndarray:
        """Return g^i = Gamma^i_jk v^j v^k (the quadratic forcing term)."""
        v = np.asarray(velocity, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"velocity has shape {v.shape}, expected {(self.n,)}")
        return self.gamma.dot(v).dot(v)


@dataclass(frozen=True)
class VhSystem:
    """Volterra-Hamilton system: quadratic population dynamics plus
    per-capita production rates k_i feeding cumulative production variables."""

    sode: QuadraticSode
    lam: np.ndarray
    prod_rate: np.ndarray = None  # defaults to 1 per species

    def __post_init__(self):
        n = self.sode.n
        lam = _frozen_array(np.atleast_1d(self.lam), (n,), "lam")
        if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
            raise ValueError("growth rates must be finite and > 0")
        pr = np.ones(n) if self.prod_rate is None else np.atleast_1d(self.prod_rate)
        pr = _frozen_array(pr, (n,), "prod_rate")
        if np.any(pr <= 0) or not np.all(np.isfinite(pr)):
            raise ValueError("production rates must be finite and > 0")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "prod_rate", pr)

    @property
    def n(self) -> int:
        return self.sode.n


@dataclass(frozen=True)
class State:
    """Population densities and, optionally, cumulative productions."""

    populations: np.ndarray
    productions: np.ndarray | None = None

    def __post_init__(self):
        pops = np.atleast_1d(np.array(self.populations, dtype=float))
        if not np.all(np.isfinite(pops)):
            raise ValueError("populations must be finite")
        pops.flags.writeable = False
        object.__setattr__(self, "populations", pops)
        if self.productions is not None:
            prod = _frozen_array(np.atleast_1d(self.productions),
                                 pops.shape, "productions")
            object.__setattr__(self, "productions", prod)

    @property
    def n(self) -> int:
        return self.populations.shape[0]


@dataclass(frozen=True)
class EventRecord:
    """Extinction-threshold crossing: which species, when, and which way."""

    species: int
    time: float
    direction: int = -1


@dataclass(frozen=True)
class Trajectory:
    """Sampled flow of an integrated system.

    ``states`` holds the primary variables (populations for a physical-time
    run, positions for an intrinsic-time run); ``velocities`` and
    ``productions`` are optional companion samples on the same grid.
    ``time_scale`` is "t" for physical time, "s" for intrinsic time.
    """

    times: np.ndarray
    states: np.ndarray
    time_scale: str = "t"
    velocities: np.ndarray | None = None
    productions: np.ndarray | None = None
    events: tuple[EventRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        times = np.atleast_1d(np.array(self.times, dtype=float))
        states = np.array(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] != times.shape[0]:
            raise ValueError("states must be (len(times), n)")
        if times.shape[0] >= 2 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        if self.time_scale not in ("t", "s"):
            raise ValueError("time_scale must be 't' or 's'")
        times.flags.writeable = False
        states.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        for name in ("velocities", "productions"):
            arr = getattr(self, name)
            if arr is not None:
                arr = _frozen_array(arr, states.shape, name)
                object.__setattr__(self, name, arr)
        object.__setattr__(self, "events", tuple(self.events))

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return self.times.shape[0]

    def state_at(self, index: int) -> State:
        prod = None if self.productions is None else self.productions[index]
        return State(self.states[index], prod)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def vh_from_params(p: ModelParams) -> VhSystem:
    """Rewrite growth/capacity/interaction parameters as a VH system.

    The quadratic coefficients absorb both self-limitation and pairwise
    interaction: gamma[i,i,i] = lam_i/K_i and, for j != i,
    gamma[i,i,j] = gamma[i,j,i] = -interaction[i,j] * lam_i / (2 K_i).
    Production rates default to 1 for every species.
    """
    n = p.n
    gamma = np.zeros((n, n, n))
    for i in range(n):
        gamma[i, i, i] = p.lam[i] / p.capacity[i]
        for j in range(n):
            if j == i:
                continue
            c = -p.interaction[i, j] * p.lam[i] / (2.0 * p.capacity[i])
            gamma[i, i, j] = c
            gamma[i, j, i] = c
    return VhSystem(sode=QuadraticSode(gamma), lam=p.lam)


def rhs(v: VhSystem, st: State | np.ndarray) -> np.ndarray:
    """Population rate -Gamma^i_jk N^j N^k + lambda_i N^i at a state."""
    pops = st.populations if isinstance(st, State) else np.asarray(st, dtype=float)
    if pops.shape != (v.n,):
        raise ValueError(f"state has shape {pops.shape}, expected {(v.n,)}")
    return -v.sode.gamma.dot(pops).dot(pops) + v.lam * pops
