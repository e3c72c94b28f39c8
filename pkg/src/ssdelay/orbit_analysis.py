"""Periodic-orbit detection and the hidden / self-excited classification."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dde_core import DelayRhs, HistorySegment, StepperConfig, continue_from, integrate, Trajectory
from .errors import ConfigurationError, ContinuationBreakError
from .models import (GainFamilyParams, SuarezSchopfParams, dissipativity_radius, equilibria,
                     family_system, ss_system)

DAYS_PER_YEAR = 365.0


@dataclass(frozen=True)
class PeriodEstimate:
    period: float
    amplitude: float
    confidence: float
    n_cycles: int = 0


def period_from_samples(t, x, max_spread: float = 0.05, min_amplitude: float = 1e-6
                        ) -> PeriodEstimate | None:
    """Mean spacing of upward crossings of ``x - midrange(x)``.

    Crossing times are linearly interpolated between samples.  Returns
    ``None`` with fewer than 4 crossings or a cycle-to-cycle spread above
    ``max_spread`` (relative to the mean).
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.size < 3:
        return None
    lo, hi = float(x.min()), float(x.max())
    if hi - lo < min_amplitude:
        return None
    y = x - 0.5 * (lo + hi)
    idx = np.where((y[:-1] < 0.0) & (y[1:] >= 0.0))[0]
    if idx.size < 4:
        return None
    tc = t[idx] - y[idx] * (t[idx + 1] - t[idx]) / (y[idx + 1] - y[idx])
    d = np.diff(tc)
    mean = float(d.mean())
    spread = float((d.max() - d.min()) / mean)
    if spread > max_spread:
        return None
    confidence = float(np.clip(1.0 - spread / 0.1, 0.0, 1.0))
    return PeriodEstimate(mean, float(np.max(np.abs(x))), confidence, int(d.size))


def detect_periodic_orbit(traj: Trajectory, transient_fraction: float = 0.5,
                          component: int = 0) -> PeriodEstimate | None:
    """Period of the post-transient part of ``traj`` (see :func:`period_from_samples`)."""
    if not (0.0 <= transient_fraction < 1.0):
        raise ConfigurationError("transient_fraction must lie in [0, 1)")
    t, X = traj.times, traj.states[:, component]
    start = traj.t_start + transient_fraction * (traj.t_end - traj.t_start)
    keep = t >= start
    return period_from_samples(t[keep], X[keep])


def period_to_days(sigma: float, tau: float, delta_days: float = 400.0) -> float:
    """Dimensionless period to days: ``sigma * Delta / tau``."""
    if sigma <= 0 or tau <= 0 or delta_days <= 0:
        raise ConfigurationError("sigma, tau and delta must be positive")
    return sigma * delta_days / tau


def period_to_years(sigma: float, tau: float, delta_days: float = 400.0) -> float:
    return period_to_days(sigma, tau, delta_days) / DAYS_PER_YEAR


# --------------------------------------------------------------------------
# Probes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeConfig:
    horizon: float = 1000.0
    step: float = 1.0e-3
    transient_fraction: float = 0.5
    eq_tol: float = 1.0e-4
    dwell: float = 50.0
    chunk: float = 100.0
    sample_dt: float = 1.0e-2


@dataclass
class ProbeOutcome:
    seed: str
    kind: str  # "equilibrium" | "periodic" | "undetermined"
    equilibrium: int | None = None
    final_distance: float = math.nan
    estimate: PeriodEstimate | None = None
    t_final: float = 0.0
    final_segment: HistorySegment | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return dict(seed=self.seed, outcome=self.kind, equilibrium=self.equilibrium,
                    final_distance=self.final_distance,
                    period=None if self.estimate is None else self.estimate.period,
                    amplitude=None if self.estimate is None else self.estimate.amplitude,
                    t_final=self.t_final)


def run_probe(rhs: DelayRhs, seed: HistorySegment, label: str, eq_points: Sequence[float],
              cfg: ProbeConfig) -> ProbeOutcome:
    """Integrate in chunks, stopping early once within ``eq_tol`` of an
    equilibrium for ``dwell`` time units; otherwise look for a periodic orbit
    in the post-transient window."""
    stepper = StepperConfig(cfg.step)
    eq = np.asarray(eq_points, dtype=float)
    traj = integrate(rhs, seed, (0.0, min(cfg.chunk, cfg.horizon)), stepper)
    stride = max(1, int(round(cfg.sample_dt / traj.step)))
    ts, xs = [traj.times[::stride]], [traj.states[::stride, 0]]
    while True:
        # nodes since the last exit from every tolerance tube
        x_all = np.concatenate(xs)
        t_all = np.concatenate(ts)
        dist = np.abs(x_all[:, None] - eq[None, :])
        nearest = int(np.argmin(dist[-1]))
        outside = np.where(dist[:, nearest] >= cfg.eq_tol)[0]
        since = t_all[0] if outside.size == 0 else t_all[outside[-1]]
        if t_all[-1] - since >= cfg.dwell and outside.size < len(t_all):
            return ProbeOutcome(label, "equilibrium", nearest, float(dist[-1, nearest]),
                                None, float(traj.t_end), traj.final_segment())
        if traj.t_end >= cfg.horizon - 1e-9:
            break
        traj = continue_from(rhs, traj, min(traj.t_end + cfg.chunk, cfg.horizon), stepper)
        ts.append(traj.times[stride::stride])
        xs.append(traj.states[stride::stride, 0])
    t_all = np.concatenate(ts)
    x_all = np.concatenate(xs)
    keep = t_all >= cfg.transient_fraction * t_all[-1]
    est = period_from_samples(t_all[keep], x_all[keep])
    final_dist = float(np.min(np.abs(x_all[-1] - eq)))
    kind = "periodic" if est is not None else "undetermined"
    return ProbeOutcome(label, kind, None, final_dist, est, float(traj.t_end), traj.final_segment())


def same_orbit(a: PeriodEstimate, b: PeriodEstimate, period_tol=0.02, amp_tol=0.05) -> bool:
    return (abs(a.period - b.period) <= period_tol * max(a.period, b.period)
            and abs(a.amplitude - b.amplitude) <= amp_tol * max(a.amplitude, b.amplitude))


# --------------------------------------------------------------------------
# Seeds
# --------------------------------------------------------------------------

def neighborhood_seeds(center: float, radius: float, tau: float, m: int):
    """Eight histories within sup-distance ``radius`` of the constant ``center``."""
    r, c = radius, center
    return [
        (f"const:{c + r:g}", HistorySegment.constant(c + r, tau, m)),
        (f"const:{c - r:g}", HistorySegment.constant(c - r, tau, m)),
        (f"const:{c + r / 2:g}", HistorySegment.constant(c + r / 2, tau, m)),
        (f"const:{c - r / 2:g}", HistorySegment.constant(c - r / 2, tau, m)),
        (f"linear:{c - r:g},{c + r:g}", HistorySegment.linear(c - r, c + r, tau, m)),
        (f"linear:{c + r:g},{c - r:g}", HistorySegment.linear(c + r, c - r, tau, m)),
        (f"linear:{c:g},{c + r:g}", HistorySegment.linear(c, c + r, tau, m)),
        (f"linear:{c:g},{c - r:g}", HistorySegment.linear(c, c - r, tau, m)),
    ]


def outside_seeds(p: SuarezSchopfParams, m: int, linear_amp: float = 0.036):
    """Launch points away from every equilibrium: constants beyond the
    absorbing ball and the linear profiles ``phi(0) = +-a, phi(-tau) = -+a``."""
    g = dissipativity_radius(p) + 0.5
    return [
        (f"linear:{-linear_amp:g},{linear_amp:g}", HistorySegment.linear(-linear_amp, linear_amp, p.tau, m)),
        (f"linear:{linear_amp:g},{-linear_amp:g}", HistorySegment.linear(linear_amp, -linear_amp, p.tau, m)),
        (f"const:{g:g}", HistorySegment.constant(g, p.tau, m)),
        (f"const:{-g:g}", HistorySegment.constant(-g, p.tau, m)),
    ]


# --------------------------------------------------------------------------
# Classification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassifyConfig:
    probe: ProbeConfig = ProbeConfig()
    radius: float = 1.0e-2
    linear_amp: float = 0.036


@dataclass
class OrbitClassification:
    verdict: str  # "equilibrium" | "periodic" | "undetermined"
    provenance: str | None = None  # "hidden" | "self_excited"
    estimate: PeriodEstimate | None = None
    equilibria_reached: tuple = ()
    evidence: list = field(default_factory=list)
    localized_by: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    @property
    def seeds_tried(self) -> int:
        return len(self.evidence)

    @property
    def small_outcomes(self) -> list[ProbeOutcome]:
        return [o for o in self.evidence if o.seed.startswith("near")]

    def to_json(self) -> str:
        return json.dumps(dict(
            verdict=self.verdict, provenance=self.provenance,
            period=None if self.estimate is None else self.estimate.period,
            amplitude=None if self.estimate is None else self.estimate.amplitude,
            equilibria_reached=list(self.equilibria_reached),
            localized_by=self.localized_by,
            seeds=[o.as_dict() for o in self.evidence],
            settings=self.settings), indent=2)


def classify_attractor(p: SuarezSchopfParams, config: ClassifyConfig | None = None,
                       ) -> OrbitClassification:
    """Decide whether the attractor at ``p`` is an equilibrium, a hidden orbit
    or a self-excited orbit.

    Eight seeds of sup-radius ``config.radius`` around each of the three
    equilibria probe self-excitation; the outside seeds from
    :func:`outside_seeds` probe for orbits not reachable that way.
    """
    cfg = config or ClassifyConfig()
    m = StepperConfig(cfg.probe.step).snapped_m(p.tau)
    rhs = ss_system(p)
    eqs = equilibria(p)
    evidence: list[ProbeOutcome] = []
    for label, seed in outside_seeds(p, m, cfg.linear_amp):
        evidence.append(run_probe(rhs, seed, "outside " + label, eqs, cfg.probe))
    for k, e in enumerate(eqs):
        for label, seed in neighborhood_seeds(e, cfg.radius, p.tau, m):
            evidence.append(run_probe(rhs, seed, f"near[{k}] " + label, eqs, cfg.probe))
    settings = dict(alpha=p.alpha, tau=p.tau, horizon=cfg.probe.horizon, step=cfg.probe.step,
                    radius=cfg.radius, eq_tol=cfg.probe.eq_tol, dwell=cfg.probe.dwell,
                    transient_fraction=cfg.probe.transient_fraction)
    return _aggregate(evidence, settings)


def _aggregate(evidence: list[ProbeOutcome], settings: dict) -> OrbitClassification:
    small = [o for o in evidence if o.seed.startswith("near")]
    outer = [o for o in evidence if not o.seed.startswith("near")]
    small_periodic = [o for o in small if o.kind == "periodic"]
    outer_periodic = [o for o in outer if o.kind == "periodic"]
    reached = tuple(sorted({o.equilibrium for o in evidence if o.kind == "equilibrium"}))
    if small_periodic:
        est = small_periodic[0].estimate
        loc = [o.seed for o in evidence if o.kind == "periodic" and same_orbit(o.estimate, est)]
        return OrbitClassification("periodic", "self_excited", est, reached, evidence, loc, settings)
    if outer_periodic and all(o.kind == "equilibrium" for o in small):
        est = outer_periodic[0].estimate
        loc = [o.seed for o in outer_periodic if same_orbit(o.estimate, est)]
        return OrbitClassification("periodic", "hidden", est, reached, evidence, loc, settings)
    if all(o.kind == "equilibrium" for o in evidence):
        return OrbitClassification("equilibrium", None, None, reached, evidence, [], settings)
    return OrbitClassification("undetermined", None, None, reached, evidence, [], settings)


# --------------------------------------------------------------------------
# Continuation in the feedback-gain family
# --------------------------------------------------------------------------

@dataclass
class ContinuationStep:
    epsilon: float
    estimate: PeriodEstimate | None
    final_segment: HistorySegment = field(repr=False)
    outcome: ProbeOutcome = field(repr=False)


def continuation_run(g: GainFamilyParams, eps_schedule: Sequence[float],
                     config: ProbeConfig | None = None, seed_amplitude: float = 1.0e-2
                     ) -> list[ContinuationStep]:
    """Track the orbit of the gained system (``epsilon = 0``) to the original
    model (``epsilon = 1``), restarting each step from the previous final segment.

    Raises :class:`ContinuationBreakError` as soon as a step ends on an
    equilibrium or without a detectable orbit.
    """
    sched = [float(e) for e in eps_schedule]
    if len(sched) < 2 or sched[0] != 0.0 or sched[-1] != 1.0 or any(
            b <= a for a, b in zip(sched, sched[1:])):
        raise ConfigurationError("epsilon schedule must increase strictly from 0 to 1")
    cfg = config or ProbeConfig()
    m = StepperConfig(cfg.step).snapped_m(g.base.tau)
    seed = HistorySegment.constant(seed_amplitude, g.base.tau, m)
    out: list[ContinuationStep] = []
    for eps in sched:
        ge = g.with_epsilon(eps)
        # equilibria of the current family member, for the convergence test
        eqs = _family_equilibria(ge)
        res = run_probe(family_system(ge), seed, f"eps={eps:g}", eqs, cfg)
        if res.kind != "periodic":
            raise ContinuationBreakError(
                f"orbit lost at epsilon={eps:g} ({res.kind}, distance {res.final_distance:.3g})", eps)
        out.append(ContinuationStep(eps, res.estimate, res.final_segment, res))
        seed = res.final_segment
    return out


def _family_equilibria(g: GainFamilyParams) -> list[float]:
    """Real zeros of ``(3a - 2) x - a x + F_eps(x) = -2(1 - a) x + F_eps(x)``."""
    from scipy.optimize import brentq

    from .models import family_rhs

    def f(x):
        return family_rhs(x, x, g)

    grid = np.linspace(-3.0, 3.0, 6001)
    vals = np.array([f(x) for x in grid])
    roots = [0.0]
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0 and abs(a) > 1e-12:
            roots.append(float(a))
        elif fa * fb < 0:
            r = brentq(f, a, b)
            if abs(r) > 1e-9:
                roots.append(r)
    return sorted(set(roots))
