"""Staged coral-algae dynamics and the competition-outcome machinery.

Three stages of a bleaching/recovery episode:

* Stage 1 (before bleaching): coral N and resident alga A1 in symbiosis,
  alga A2 commensal (benefits from the coral, never feeds back on it).
* Stage 2 (bleaching): all three interact; the two algae compete with
  impacts mu1, mu2, and the coral draws a shared benefit from both.
  When competition dominates the benefit terms, the algae decouple into a
  classic two-species competition system.
* Stage 3 (after recovery): the surviving alga A2 replaces A1 in the
  symbiosis; the equations have the same shape as stage 1's (N, A1)
  subsystem under A1 -> A2, K1 -> K2, delta1 -> delta2.

The four-outcome competition classifier, its simulation-backed verifier,
and the stitched three-stage recovery pipeline live here as well.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .core import EventRecord, ModelParams, Trajectory, VhSystem, vh_from_params
from .integrator import IntegratorOptions, integrate, options_with
from .production import symbiotic_pair_sode

__all__ = [
    "StageScenario",
    "CompetitionOutcome",
    "OutcomeReport",
    "PipelineResult",
    "default_scenario",
    "stage1_params", "stage2_params", "stage3_params", "stage2_reduced_params",
    "stage1_field", "stage2_field", "stage3_field", "stage2_reduced_field",
    "stage1_production_system", "stage3_production_system",
    "stage1_intrinsic_sode", "stage3_intrinsic_sode",
    "classify_competition",
    "competition_equilibrium",
    "symbiosis_equilibrium",
    "verify_outcome",
    "run_recovery_pipeline",
    "reduction_gap",
]


@dataclass(frozen=True)
class StageScenario:
    """Parameters, initial densities, and durations for a recovery episode.

    Defaults are the desk scenario used throughout the tests. ``mu1 > mu2``
    (warming hits the resident alga harder) is required by the recovery
    pipeline but not at construction, so arbitrary competition regimes can
    be explored with the same type.
    """

    lam: float = 1.0
    K: float = 2.0
    K1: float = 1.0
    K2: float = 1.0
    delta: float = 0.1
    delta1: float = 0.1
    delta2: float = 0.1
    delta_tilde: float = 0.1
    mu1: float = 2.0
    mu2: float = 0.5
    n0: float = 1.0
    a1_0: float = 0.5
    a2_0: float = 0.05
    durations: tuple[float, float, float] = (10.0, 40.0, 20.0)
    transition: str = "event"

    def __post_init__(self):
        positives = {
            "lam": self.lam, "K": self.K, "K1": self.K1, "K2": self.K2,
            "mu1": self.mu1, "mu2": self.mu2,
        }
        for name, val in positives.items():
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be finite and > 0")
        for name in ("delta", "delta1", "delta2", "delta_tilde"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        for name, val in (("n0", self.n0), ("a1_0", self.a1_0), ("a2_0", self.a2_0)):
            if not (np.isfinite(val) and val >= 0):
                raise ValueError(f"{name} must be finite and >= 0")
        if len(self.durations) != 3 or any(d <= 0 for d in self.durations):
            raise ValueError("durations must be three positive spans")
        if self.transition not in ("event", "fixed"):
            raise ValueError("transition must be 'event' or 'fixed'")


def default_scenario() -> StageScenario:
    return StageScenario()


class CompetitionOutcome(enum.Enum):
    FOUNDER_CONTROL = "founder_control"
    SPECIES1_EXCLUDED = "species1_excluded"
    SPECIES2_EXCLUDED = "species2_excluded"
    STABLE_COEXISTENCE = "stable_coexistence"
    DEGENERATE = "degenerate"


# --- stage parameter maps (species order: N, A1, A2 / pairs keep N first) ---

def stage1_params(sc: StageScenario) -> ModelParams:
    """Commensalism + symbiosis: A2 benefits from N, N ignores A2."""
    inter = np.array([
        [0.0, sc.delta, 0.0],
        [sc.delta1, 0.0, 0.0],
        [sc.delta2, 0.0, 0.0],
    ])
    return ModelParams(lam=[sc.lam] * 3, capacity=[sc.K, sc.K1, sc.K2],
                       interaction=inter)


def stage2_params(sc: StageScenario) -> ModelParams:
    """Symbiosis + competition: shared coral benefit, algae compete."""
    inter = np.array([
        [0.0, sc.delta_tilde, sc.delta_tilde],
        [sc.delta1, 0.0, -sc.mu1],
        [sc.delta2, -sc.mu2, 0.0],
    ])
    return ModelParams(lam=[sc.lam] * 3, capacity=[sc.K, sc.K1, sc.K2],
                       interaction=inter)


def stage3_params(sc: StageScenario) -> ModelParams:
    """Renewed symbiosis between N and A2 (two species)."""
    inter = np.array([
        [0.0, sc.delta],
        [sc.delta2, 0.0],
    ])
    return ModelParams(lam=[sc.lam] * 2, capacity=[sc.K, sc.K2], interaction=inter)


def stage2_reduced_params(sc: StageScenario) -> ModelParams:
    """Competition-only algae subsystem (coral terms dropped)."""
    inter = np.array([
        [0.0, -sc.mu1],
        [-sc.mu2, 0.0],
    ])
    return ModelParams(lam=[sc.lam] * 2, capacity=[sc.K1, sc.K2], interaction=inter)


# --- stage right-hand sides (scalar closures, fast for the small systems) ---

def stage1_field(sc: StageScenario):
    lam, K, K1, K2 = sc.lam, sc.K, sc.K1, sc.K2
    d, d1, d2 = sc.delta, sc.delta1, sc.delta2

    def field(t, y):
        N, A1, A2 = y
        return np.array([
            lam * N * (1.0 - N / K + d * A1 / K),
            lam * A1 * (1.0 - A1 / K1 + d1 * N / K1),
            lam * A2 * (1.0 - A2 / K2 + d2 * N / K2),
        ])

    return field


def stage2_field(sc: StageScenario):
    lam, K, K1, K2 = sc.lam, sc.K, sc.K1, sc.K2
    dt_, d1, d2 = sc.delta_tilde, sc.delta1, sc.delta2
    m1, m2 = sc.mu1, sc.mu2

    def field(t, y):
        N, A1, A2 = y
        return np.array([
            lam * N * (1.0 - N / K + dt_ * (A1 + A2) / K),
            lam * A1 * (1.0 - A1 / K1 + d1 * N / K1 - m1 * A2 / K1),
            lam * A2 * (1.0 - A2 / K2 + d2 * N / K2 - m2 * A1 / K2),
        ])

    return field


def stage2_reduced_field(sc: StageScenario):
    lam, K1, K2, m1, m2 = sc.lam, sc.K1, sc.K2, sc.mu1, sc.mu2

    def field(t, y):
        A1, A2 = y
        return np.array([
            lam * A1 * (1.0 - A1 / K1 - m1 * A2 / K1),
            lam * A2 * (1.0 - A2 / K2 - m2 * A1 / K2),
        ])

    return field


def stage3_field(sc: StageScenario):
    lam, K, K2, d, d2 = sc.lam, sc.K, sc.K2, sc.delta, sc.delta2

    def field(t, y):
        N, A2 = y
        return np.array([
            lam * N * (1.0 - N / K + d * A2 / K),
            lam * A2 * (1.0 - A2 / K2 + d2 * N / K2),
        ])

    return field


# --- production pairs and their intrinsic-time coefficients ---

def stage1_production_system(sc: StageScenario) -> VhSystem:
    """Two-species VH system for the pre-bleaching (N, A1) pair."""
    inter = np.array([[0.0, sc.delta], [sc.delta1, 0.0]])
    p = ModelParams(lam=[sc.lam] * 2, capacity=[sc.K, sc.K1], interaction=inter)
    return vh_from_params(p)


def stage3_production_system(sc: StageScenario) -> VhSystem:
    """Two-species VH system for the post-recovery (N, A2) pair."""
    inter = np.array([[0.0, sc.delta], [sc.delta2, 0.0]])
    p = ModelParams(lam=[sc.lam] * 2, capacity=[sc.K, sc.K2], interaction=inter)
    return vh_from_params(p)


def stage1_intrinsic_sode(sc: StageScenario, cross_sign: int = +1):
    return symbiotic_pair_sode(sc.lam, sc.K, sc.delta, sc.K1, sc.delta1,
                               cross_sign=cross_sign)


def stage3_intrinsic_sode(sc: StageScenario, cross_sign: int = +1):
    return symbiotic_pair_sode(sc.lam, sc.K, sc.delta, sc.K2, sc.delta2,
                               cross_sign=cross_sign)


# --- the four-outcome classifier and its equilibria ---

def classify_competition(K1: float, K2: float, mu1: float, mu2: float,
                         tol: float = 1e-12) -> CompetitionOutcome:
    """Classify two-species competition by the strict threshold inequalities.

    mu1 is compared against K1/K2 and mu2 against K2/K1; equality within
    ``tol`` of either threshold is reported as DEGENERATE instead of
    guessing a side.
    """
    for name, val in (("K1", K1), ("K2", K2), ("mu1", mu1), ("mu2", mu2)):
        if not (np.isfinite(val) and val > 0):
            raise ValueError(f"{name} must be finite and > 0")
    r1 = K1 / K2
    r2 = K2 / K1
    if abs(mu1 - r1) <= tol or abs(mu2 - r2) <= tol:
        return CompetitionOutcome.DEGENERATE
    if mu1 > r1 and mu2 > r2:
        return CompetitionOutcome.FOUNDER_CONTROL
    if mu1 > r1 and mu2 < r2:
        return CompetitionOutcome.SPECIES1_EXCLUDED
    if mu1 < r1 and mu2 > r2:
        return CompetitionOutcome.SPECIES2_EXCLUDED
    return CompetitionOutcome.STABLE_COEXISTENCE


def competition_equilibrium(K1: float, K2: float, mu1: float, mu2: float):
    """Interior equilibrium of the competition pair from its nullclines."""
    den = 1.0 - mu1 * mu2
    if den == 0.0:
        return None
    a1 = (K1 - mu1 * K2) / den
    a2 = (K2 - mu2 * K1) / den
    return np.array([a1, a2])


def symbiosis_equilibrium(K: float, delta: float, K_partner: float,
                          delta_partner: float):
    """Positive equilibrium of a mutualistic pair, if the nullclines cross.

    Solves N = K + delta*A and A = K_partner + delta_partner*N; requires
    delta * delta_partner < 1 for a finite crossing.
    """
    den = 1.0 - delta * delta_partner
    if den <= 0.0:
        return None
    n_star = (K + delta * K_partner) / den
    a_star = (K_partner + delta_partner * K) / den
    return np.array([n_star, a_star])


# --- simulation-backed verification of the classifier ---

@dataclass(frozen=True)
class OutcomeReport:
    predicted: CompetitionOutcome
    observed: CompetitionOutcome | None
    agree: bool
    decided: bool
    horizon_used: float
    final_state: np.ndarray | None = None
    events: tuple[EventRecord, ...] = field(default_factory=tuple)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "predicted": self.predicted.value,
            "observed": None if self.observed is None else self.observed.value,
            "agree": self.agree,
            "decided": self.decided,
            "horizon_used": self.horizon_used,
            "note": self.note,
        }


_REL_EQ = 1e-3  # relative closeness that counts as "converged to equilibrium"


def _observe_run(sc: StageScenario, y0, opts: IntegratorOptions,
                 chunk: float, max_time: float):
    """Integrate the reduced competition system until the outcome is readable.

    Returns (outcome-or-None, final state, events, horizon used). A run is
    decided when one species' extinction event has fired and the survivor
    sits at its capacity, or when both species sit at the interior
    equilibrium.
    """
    fld = stage2_reduced_field(sc)
    interior = competition_equilibrium(sc.K1, sc.K2, sc.mu1, sc.mu2)
    caps = np.array([sc.K1, sc.K2])
    y = np.asarray(y0, dtype=float)
    events: list[EventRecord] = []
    t = 0.0
    while t < max_time:
        t_next = min(t + chunk, max_time)
        run = integrate(fld, y, options_with(opts, t_span=(t, t_next)))
        events.extend(run.events)
        y = run.final_state
        t = t_next
        extinct = {e.species for e in events}
        if extinct == {0} and abs(y[1] - caps[1]) <= _REL_EQ * caps[1]:
            return CompetitionOutcome.SPECIES1_EXCLUDED, y, events, t
        if extinct == {1} and abs(y[0] - caps[0]) <= _REL_EQ * caps[0]:
            return CompetitionOutcome.SPECIES2_EXCLUDED, y, events, t
        if not extinct and interior is not None and np.all(interior > 0):
            if np.all(np.abs(y - interior) <= _REL_EQ * np.abs(interior)):
                return CompetitionOutcome.STABLE_COEXISTENCE, y, events, t
    return None, y, events, t


def verify_outcome(sc: StageScenario, opts: IntegratorOptions | None = None,
                   max_time: float | None = None) -> OutcomeReport:
    """Check the classifier against simulations of the competition system.

    Founder control is verified with two complementary initial conditions
    (each biased toward one species); the other outcomes run from the
    scenario's algal densities. An undecided horizon is reported as such,
    never guessed.
    """
    predicted = classify_competition(sc.K1, sc.K2, sc.mu1, sc.mu2)
    if predicted is CompetitionOutcome.DEGENERATE:
        raise ValueError("scenario sits on a classification boundary")
    chunk = 80.0 / sc.lam
    horizon = (640.0 / sc.lam) if max_time is None else max_time
    if opts is None:
        opts = IntegratorOptions(t_span=(0.0, 1.0), rel_tol=1e-8, abs_tol=1e-11,
                                 sample_count=2)

    if predicted is CompetitionOutcome.FOUNDER_CONTROL:
        ic_a = (0.95 * sc.K1, 0.02 * sc.K2)
        ic_b = (0.02 * sc.K1, 0.95 * sc.K2)
        out_a, ya, ev_a, ta = _observe_run(sc, ic_a, opts, chunk, horizon)
        out_b, yb, ev_b, tb = _observe_run(sc, ic_b, opts, chunk, horizon)
        decided = out_a is not None and out_b is not None
        if decided and out_a != out_b:
            observed = CompetitionOutcome.FOUNDER_CONTROL
            note = f"winner flips with the starting proportions ({out_a.value} vs {out_b.value})"
        elif decided:
            observed = out_a
            note = "same winner from both starting proportions"
        else:
            observed = None
            note = "horizon too short to decide"
        return OutcomeReport(predicted=predicted, observed=observed,
                             agree=observed == predicted, decided=decided,
                             horizon_used=max(ta, tb), final_state=ya,
                             events=tuple(ev_a) + tuple(ev_b), note=note)

    observed, y, events, used = _observe_run(sc, (sc.a1_0, sc.a2_0), opts,
                                             chunk, horizon)
    decided = observed is not None
    note = "" if decided else "horizon too short to decide"
    return OutcomeReport(predicted=predicted, observed=observed,
                         agree=observed == predicted, decided=decided,
                         horizon_used=used, final_state=y,
                         events=tuple(events), note=note)


# --- the stitched three-stage pipeline ---

@dataclass(frozen=True)
class PipelineResult:
    stage1: Trajectory
    stage2: Trajectory
    stage3: Trajectory | None
    recovered: bool | None  # None = horizon too short to decide
    extinction_time: float | None
    equilibrium: np.ndarray | None
    final_state: np.ndarray | None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "recovered": self.recovered,
            "extinction_time": self.extinction_time,
            "equilibrium_estimate": None if self.equilibrium is None
            else [float(v) for v in self.equilibrium],
            "final_state": None if self.final_state is None
            else [float(v) for v in self.final_state],
            "note": self.note,
        }


def run_recovery_pipeline(sc: StageScenario,
                          opts: IntegratorOptions | None = None) -> PipelineResult:
    """Run the three stages end to end, stitching states at the boundaries.

    Stage 2 hands over to stage 3 at the resident alga's extinction event
    (``transition="event"``) or after its fixed duration; if the alga never
    goes extinct within the stage-2 horizon, the episode is reported as
    not recovered rather than extrapolated.
    """
    if not sc.mu1 > sc.mu2:
        raise ValueError("recovery requires mu1 > mu2 (warming harms the resident alga more)")
    base = IntegratorOptions(t_span=(0.0, 1.0)) if opts is None else opts
    d1, d2, d3 = sc.durations

    t1 = integrate(stage1_field(sc), (sc.n0, sc.a1_0, sc.a2_0),
                   options_with(base, t_span=(0.0, d1)))

    stage2_opts = options_with(base, t_span=(d1, d1 + d2),
                               terminal_species=1 if sc.transition == "event" else None)
    t2 = integrate(stage2_field(sc), t1.final_state, stage2_opts)

    a1_events = [e for e in t2.events if e.species == 1]
    if not a1_events:
        return PipelineResult(stage1=t1, stage2=t2, stage3=None, recovered=None,
                              extinction_time=None, equilibrium=None,
                              final_state=t2.final_state,
                              note="recovery not reached: resident alga survived the stage-2 horizon")

    ext_time = a1_events[0].time
    seed = t2.final_state[[0, 2]]  # (N, A2), exact stage-2 endpoint values
    t2_end = t2.times[-1]
    t3 = integrate(stage3_field(sc), seed,
                   options_with(base, t_span=(t2_end, t2_end + d3),
                                terminal_species=None))

    eq = symbiosis_equilibrium(sc.K, sc.delta, sc.K2, sc.delta2)
    return PipelineResult(stage1=t1, stage2=t2, stage3=t3, recovered=True,
                          extinction_time=ext_time, equilibrium=eq,
                          final_state=t3.final_state,
                          note="resident alga excluded; symbiosis re-established")


def reduction_gap(sc: StageScenario, opts: IntegratorOptions | None = None,
                  horizon: float | None = None) -> float:
    """Max gap between the full stage-2 algae and the competition-only model.

    Both systems start from the scenario's densities and run over the
    stage-2 horizon; the gap is the largest componentwise difference of
    (A1, A2) on the shared grid. Small when competition dominates the
    benefit coefficients, large otherwise; reported, not judged.
    """
    span = sc.durations[1] if horizon is None else horizon
    base = IntegratorOptions(t_span=(0.0, span)) if opts is None \
        else options_with(opts, t_span=(0.0, span), terminal_species=None)
    full = integrate(stage2_field(sc), (sc.n0, sc.a1_0, sc.a2_0), base)
    reduced = integrate(stage2_reduced_field(sc), (sc.a1_0, sc.a2_0), base)
    return float(np.max(np.abs(full.states[:, 1:] - reduced.states)))
