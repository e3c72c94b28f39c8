"""Ring of coupled lossless transmission lines: simulation and regime classification."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dde_core import HistorySegment, StepperConfig, Trajectory, continue_from, integrate_neutral
from .errors import ConfigurationError
from .models import RingParams, ring_system
from .orbit_analysis import PeriodEstimate, period_from_samples


@dataclass(frozen=True)
class RingConfig:
    horizon: float = 1500.0
    step: float = 1.0e-4
    sync_tol: float = 1.0e-3
    window: float = 0.2  # trailing fraction used for the verdict
    probe_radius: float = 1.0e-2
    eq_tol: float = 1.0e-4
    dwell: float = 50.0
    chunk: float = 100.0
    sample_dt: float = 1.0e-2


def _check_seeds(rp: RingParams, seeds: Sequence[HistorySegment]) -> None:
    if len(seeds) != rp.N:
        raise ConfigurationError(f"need {rp.N} seeds, got {len(seeds)}")
    for s in seeds:
        if s.dim != 1:
            raise ConfigurationError("each ring seed must be a scalar history")
        if abs(s.delay - rp.tau) > 1e-12 * rp.tau:
            raise ConfigurationError("seed delay does not match tau")


def simulate_ring(rp: RingParams, seeds: Sequence[HistorySegment], t_end: float,
                  step: float = 1.0e-4) -> Trajectory:
    """Full-resolution trajectory of all ring nodes (memory grows with ``t_end / step``)."""
    _check_seeds(rp, seeds)
    stepper = StepperConfig(step)
    m = stepper.snapped_m(rp.tau)
    hist = HistorySegment.stack([s.resample(m) for s in seeds])
    return integrate_neutral(ring_system(rp), rp.q, hist, (0.0, t_end), stepper)


@dataclass
class RingRun:
    """Sub-sampled record of a long ring simulation."""

    times: np.ndarray
    states: np.ndarray
    final_segment: HistorySegment = field(repr=False)
    stopped_early: bool = False


def stream_ring(rp: RingParams, seeds: Sequence[HistorySegment], cfg: RingConfig,
                early_exit: bool = False) -> RingRun:
    """Chunked integration keeping one sample every ``sample_dt``.

    With ``early_exit`` the run stops once every component has stayed inside
    a band of width ``eq_tol`` for ``dwell`` time units.
    """
    _check_seeds(rp, seeds)
    stepper = StepperConfig(cfg.step)
    m = stepper.snapped_m(rp.tau)
    rhs = ring_system(rp)
    hist = HistorySegment.stack([s.resample(m) for s in seeds])
    traj = integrate_neutral(rhs, rp.q, hist, (0.0, min(cfg.chunk, cfg.horizon)), stepper)
    stride = max(1, int(round(cfg.sample_dt / traj.step)))
    ts, xs = [traj.times[::stride]], [traj.states[::stride]]
    n_dwell = int(round(cfg.dwell / (stride * traj.step)))
    while traj.t_end < cfg.horizon - 1e-9:
        if early_exit:
            tail = np.concatenate(xs)[-n_dwell:]
            if len(tail) == n_dwell and np.all(np.ptp(tail, axis=0) < cfg.eq_tol):
                return RingRun(np.concatenate(ts), np.concatenate(xs), traj.final_segment(), True)
        traj = continue_from(rhs, traj, min(traj.t_end + cfg.chunk, cfg.horizon), stepper)
        ts.append(traj.times[stride::stride])
        xs.append(traj.states[stride::stride])
    return RingRun(np.concatenate(ts), np.concatenate(xs), traj.final_segment())


def synchrony_measure(states: np.ndarray) -> float:
    """``max_t max_k |x_k - x_{k+1}|`` with cyclic neighbours."""
    states = np.asarray(states, dtype=float)
    if states.shape[1] < 2 or states.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(states - np.roll(states, -1, axis=1))))


@dataclass
class RegimeFingerprint:
    periods: list
    maxima: list
    minima: list

    def matches(self, other: "RegimeFingerprint", period_tol=0.02, amp_tol=0.05) -> bool:
        scale = max(1e-12, max(np.max(np.abs(self.maxima)), np.max(np.abs(self.minima))))
        for a, b in zip(self.periods, other.periods):
            if (a is None) != (b is None):
                return False
            if a is not None and abs(a - b) > period_tol * max(a, b):
                return False
        return (np.all(np.abs(np.subtract(self.maxima, other.maxima)) <= amp_tol * scale)
                and np.all(np.abs(np.subtract(self.minima, other.minima)) <= amp_tol * scale))


@dataclass
class RingRegimeReport:
    verdict: str  # "synchronous" | "asynchronous" | "equilibrium" | "undetermined"
    periods: list
    synchrony: float
    provenance: str  # "hidden" | "self_excited" | "unclassified"
    fingerprint: RegimeFingerprint | None = None
    probes: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    @property
    def period(self) -> float | None:
        found = [p for p in self.periods if p is not None]
        return float(np.mean(found)) if found else None

    def to_json(self) -> str:
        return json.dumps(dict(
            verdict=self.verdict, provenance=self.provenance, periods=self.periods,
            synchrony=self.synchrony,
            maxima=None if self.fingerprint is None else self.fingerprint.maxima,
            minima=None if self.fingerprint is None else self.fingerprint.minima,
            probes=self.probes, settings=self.settings), indent=2)


def _judge(run: RingRun, cfg: RingConfig):
    keep = run.times >= run.times[-1] - cfg.window * (run.times[-1] - run.times[0])
    t, X = run.times[keep], run.states[keep]
    sync = synchrony_measure(X)
    ests: list[PeriodEstimate | None] = [period_from_samples(t, X[:, k]) for k in range(X.shape[1])]
    periods = [None if e is None else e.period for e in ests]
    fp = RegimeFingerprint(periods, [float(v) for v in X.max(axis=0)], [float(v) for v in X.min(axis=0)])
    if run.stopped_early or np.all(np.ptp(X, axis=0) < cfg.eq_tol):
        verdict = "equilibrium"
    elif any(p is not None for p in periods):
        verdict = "synchronous" if sync < cfg.sync_tol else "asynchronous"
    else:
        verdict = "undetermined"
    return verdict, periods, sync, fp


def zero_probe_seeds(rp: RingParams, radius: float, m: int) -> list[tuple[str, list[HistorySegment]]]:
    """``4N`` seed sets of sup-norm ``radius``, each exciting one node."""
    out = []
    zero = HistorySegment.constant(0.0, rp.tau, m)
    shapes = [("const:{r:g}", lambda r: HistorySegment.constant(r, rp.tau, m), radius),
              ("const:{r:g}", lambda r: HistorySegment.constant(r, rp.tau, m), -radius),
              ("linear:{n:g},{r:g}", lambda r: HistorySegment.linear(-r, r, rp.tau, m), radius),
              ("linear:{n:g},{r:g}", lambda r: HistorySegment.linear(-r, r, rp.tau, m), -radius)]
    for j in range(rp.N):
        for fmt, make, r in shapes:
            seeds = [zero] * rp.N
            seeds[j] = make(r)
            out.append((f"node{j + 1} " + fmt.format(r=r, n=-r), seeds))
    return out


def probe_zero_neighbourhood(rp: RingParams, cfg: RingConfig | None = None) -> list[dict]:
    cfg = cfg or RingConfig()
    m = StepperConfig(cfg.step).snapped_m(rp.tau)
    results = []
    for label, seeds in zero_probe_seeds(rp, cfg.probe_radius, m):
        run = stream_ring(rp, seeds, cfg, early_exit=True)
        verdict, periods, sync, fp = _judge(run, cfg)
        results.append(dict(seed=label, verdict=verdict, periods=periods, synchrony=sync,
                            fingerprint=fp))
    return results


def classify_ring_regime(rp: RingParams, seeds: Sequence[HistorySegment],
                         config: RingConfig | None = None, probes: list[dict] | None = None,
                         ) -> RingRegimeReport:
    """Simulate from ``seeds`` and classify the regime over the trailing window.

    ``probes`` may carry the result of :func:`probe_zero_neighbourhood` for
    the same parameters so several classifications share one probe set; pass
    an empty list to skip the provenance test.
    """
    cfg = config or RingConfig()
    run = stream_ring(rp, seeds, cfg)
    verdict, periods, sync, fp = _judge(run, cfg)
    if probes is None:
        probes = probe_zero_neighbourhood(rp, cfg)
    provenance = "unclassified"
    if probes and verdict in ("synchronous", "asynchronous"):
        hit = any(pr["verdict"] == verdict and pr["fingerprint"].matches(fp) for pr in probes)
        provenance = "self_excited" if hit else "hidden"
    settings = dict(N=rp.N, a=rp.a, b=rp.b, d=rp.d, tau=rp.tau, q=rp.q, horizon=cfg.horizon,
                    step=cfg.step, sync_tol=cfg.sync_tol, window=cfg.window)
    probe_summary = [dict(seed=p["seed"], verdict=p["verdict"], periods=p["periods"],
                          synchrony=p["synchrony"]) for p in probes]
    return RingRegimeReport(verdict, periods, sync, provenance, fp, probe_summary, settings)


def symmetry_images(seeds: Sequence[HistorySegment], include_sign: bool = True
                    ) -> list[list[HistorySegment]]:
    """Seed sets related by cyclic node shifts and, optionally, a global sign flip."""
    n = len(seeds)
    shifts = [[seeds[(k + s) % n] for k in range(n)] for s in range(n)]
    if not include_sign:
        return shifts
    return shifts + [[s.scaled(-1.0) for s in img] for img in shifts]


def delayed_projection(times, states, tau: float) -> np.ndarray:
    """Rows ``(x1(t - tau), x1(t), x2(t))`` for ``t >= times[0] + tau``."""
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    keep = times >= times[0] + tau - 1e-12
    x1d = np.interp(times[keep] - tau, times, states[:, 0])
    x2 = states[keep, 1] if states.shape[1] > 1 else np.zeros(keep.sum())
    return np.column_stack([x1d, states[keep, 0], x2])


def write_projection_csv(path, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1_delayed", "x1", "x2"])
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
    return path
