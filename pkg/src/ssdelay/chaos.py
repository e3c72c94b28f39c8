"""Poincare maps, Lyapunov exponents and amplitude sweeps for the forced model."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dde_core import HistorySegment, StepperConfig, continue_from, integrate
from .errors import ConfigurationError, SSDelayError
from .models import ForcingSpec, SuarezSchopfParams, ss_copies_system, ss_system, variational_system
from .spectral import SpectralProjector


@dataclass(frozen=True)
class ChaosConfig:
    step: float = 1.0e-4
    transient: float = 3000.0 * math.pi
    horizon: float = 10000.0
    renorm_interval: float = 1.0
    n_batches: int = 20
    chunk: float = 200.0


def _advance(rhs, seed: HistorySegment, t0: float, t1: float, stepper: StepperConfig,
             chunk: float, on_chunk=None) -> HistorySegment:
    """Integrate in pieces of length ``chunk`` and return the segment at ``t1``."""
    if t1 <= t0:
        return seed
    traj = integrate(rhs, seed, (t0, min(t0 + chunk, t1)), stepper)
    if on_chunk is not None:
        on_chunk(traj)
    while traj.t_end < t1 - 1e-9:
        traj = continue_from(rhs, traj, min(traj.t_end + chunk, t1), stepper)
        if on_chunk is not None:
            on_chunk(traj)
    return traj.final_segment()


# --------------------------------------------------------------------------
# Poincare map
# --------------------------------------------------------------------------

@dataclass
class PoincareSeries:
    samples: np.ndarray  # (n, 2) projections (c1, c2)
    times: np.ndarray
    transient: float

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "t", "c1", "c2"])
            for k, (t, (c1, c2)) in enumerate(zip(self.times, self.samples)):
                w.writerow([k, repr(float(t)), repr(float(c1)), repr(float(c2))])
        return path


def poincare_iterations(p: SuarezSchopfParams, f: ForcingSpec, seed: HistorySegment,
                        t_transient: float, t_end: float, step: float = 1.0e-4,
                        raw: bool = False, chunk: float = 200.0) -> PoincareSeries:
    """Stroboscopic samples ``x_t`` at ``t = t_transient + k * period`` projected
    onto the two leading eigen-directions of the zero equilibrium."""
    if not t_transient < t_end:
        raise ConfigurationError("t_transient must be smaller than t_end")
    if abs(seed.delay - p.tau) > 1e-12 * p.tau:
        raise ConfigurationError("seed delay does not match tau")
    stepper = StepperConfig(step)
    m = stepper.snapped_m(p.tau)
    proj = SpectralProjector(p.alpha, p.tau, m, raw=raw)
    rhs = ss_system(p, f)
    period = f.period
    n = int(math.floor((t_end - t_transient) / period + 1e-9)) + 1
    sample_times = t_transient + period * np.arange(n)
    coords = np.empty((n, 2))
    state = {"k": 0}

    def collect(traj):
        k = state["k"]
        while k < n and sample_times[k] <= traj.t_end + 1e-9:
            if sample_times[k] >= traj.t_start - 1e-9:
                seg = traj.segment_at(min(max(sample_times[k], traj.t_start), traj.t_end))
                coords[k] = proj.coords_of_values(seg.values[:, 0])
            k += 1
        state["k"] = k

    start = _advance(rhs, seed.resample(m), 0.0, t_transient, stepper, chunk)
    if t_transient <= 0.0:
        coords[0] = proj.coords_of_values(start.values[:, 0])
        state["k"] = 1
    _advance(rhs, start, t_transient, sample_times[-1], stepper, chunk, collect)
    if n == 1 and state["k"] == 0:
        coords[0] = proj.coords_of_values(start.values[:, 0])
    return PoincareSeries(coords, sample_times, t_transient)


# --------------------------------------------------------------------------
# Lyapunov exponents
# --------------------------------------------------------------------------

@dataclass
class LyapunovEstimate:
    exponents: list
    standard_errors: list
    horizon: float
    renorm_interval: float


def _initial_perturbations(m: int, k: int, delay: float):
    """Orthonormal (grid inner product) cosine profiles with exact slopes."""
    theta = np.linspace(-delay, 0.0, m + 1)
    V = np.empty((m + 1, k))
    D = np.empty((m + 1, k))
    for i in range(k):
        w = i * math.pi / delay
        V[:, i] = np.cos(w * theta)
        D[:, i] = -w * np.sin(w * theta)
    Q, R = np.linalg.qr(V)
    Rinv = np.linalg.inv(R)
    return Q, D @ Rinv


def lyapunov_exponents(p: SuarezSchopfParams, f: ForcingSpec, seed: HistorySegment, k: int = 2,
                       config: ChaosConfig | None = None) -> LyapunovEstimate:
    """Leading ``k`` Lyapunov exponents by repeated QR re-orthonormalisation.

    The perturbation histories ride along the base solution through the
    variational equation.  Every ``renorm_interval`` their node values are
    orthonormalised (Euclidean product over the grid); slopes receive the same
    linear map.  Standard errors come from batch means.
    """
    if k not in (1, 2, 3):
        raise ConfigurationError(f"k must be 1, 2 or 3, got {k}")
    cfg = config or ChaosConfig()
    if cfg.renorm_interval <= 0 or cfg.horizon <= 0 or cfg.n_batches < 2:
        raise ConfigurationError("renorm interval and horizon must be positive, n_batches >= 2")
    stepper = StepperConfig(cfg.step)
    m = stepper.snapped_m(p.tau)
    h = p.tau / m
    base = _advance(ss_system(p, f), seed.resample(m), 0.0, cfg.transient, stepper, cfg.chunk)

    Q, dQ = _initial_perturbations(m, k, p.tau)
    vals = np.hstack([base.values, Q])
    ders = np.hstack([base.derivatives, dQ])
    lefts = np.hstack([base.left_derivatives, dQ])
    rhs = variational_system(p, k, f)

    n_int = int(math.ceil(cfg.horizon / cfg.renorm_interval - 1e-9))
    steps_per = max(1, int(round(cfg.renorm_interval / h)))
    logs = np.empty((n_int, k))
    t = cfg.transient
    for j in range(n_int):
        seg = HistorySegment(p.tau, vals, ders, lefts)
        traj = integrate(rhs, seg, (t, t + steps_per * h), stepper)
        t = traj.t_end
        tail = slice(traj.n_steps, traj.n_steps + m + 1)
        X, FR, FL = traj.X[tail], traj.FR[tail], traj.FL[tail]
        Qn, R = np.linalg.qr(X[:, 1:])
        sign = np.sign(np.diag(R))
        sign[sign == 0] = 1.0
        Qn *= sign
        R = sign[:, None] * R
        logs[j] = np.log(np.abs(np.diag(R)))
        Rinv = np.linalg.inv(R)
        vals = np.hstack([X[:, :1], Qn])
        ders = np.hstack([FR[:, :1], FR[:, 1:] @ Rinv])
        lefts = np.hstack([FL[:, :1], FL[:, 1:] @ Rinv])

    dt = steps_per * h
    total = n_int * dt
    exps = logs.sum(axis=0) / total
    nb = min(cfg.n_batches, n_int)
    batches = np.array([b.sum(axis=0) / (len(b) * dt) for b in np.array_split(logs, nb)])
    errs = batches.std(axis=0, ddof=1) / math.sqrt(nb) if nb > 1 else np.zeros(k)
    order = np.argsort(-exps)
    return LyapunovEstimate([float(exps[i]) for i in order], [float(errs[i]) for i in order],
                            float(total), float(dt))


# --------------------------------------------------------------------------
# Sweeps and sensitivity
# --------------------------------------------------------------------------

@dataclass
class SweepRow:
    amplitude: float
    estimate: LyapunovEstimate | None
    error: str | None = None


def amplitude_grid(a_range: tuple[float, float], a_step: float) -> np.ndarray:
    """Half-open grid ``a0, a0 + step, ...`` strictly below ``a1``."""
    if not a_step > 0:
        raise ConfigurationError("amplitude step must be positive")
    a0, a1 = map(float, a_range)
    n = max(0, int(math.ceil((a1 - a0) / a_step - 1e-9)))
    return a0 + a_step * np.arange(n)


def amplitude_sweep(p: SuarezSchopfParams, a_range=(0.068, 0.075), a_step: float = 1.0e-4,
                    config: ChaosConfig | None = None, seed: HistorySegment | None = None,
                    omega: float = 1.0, k: int = 2, threads: int = 1) -> list[SweepRow]:
    """Lyapunov exponents over an amplitude grid; failures are kept per row."""
    cfg = config or ChaosConfig()
    m = StepperConfig(cfg.step).snapped_m(p.tau)
    seed = seed or HistorySegment.constant(5.0, p.tau, m)

    def one(a):
        try:
            return SweepRow(float(a), lyapunov_exponents(p, ForcingSpec(float(a), omega), seed, k, cfg))
        except SSDelayError as exc:
            return SweepRow(float(a), None, f"{type(exc).__name__}: {exc}")

    grid = amplitude_grid(a_range, a_step)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, grid))
    return [one(a) for a in grid]


def write_sweep_csv(path, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["A", "lambda1", "stderr1", "lambda2", "stderr2"])
        for r in rows:
            if r.estimate is None:
                w.writerow([repr(r.amplitude), "nan", "nan", "nan", "nan"])
                continue
            e, s = r.estimate.exponents, r.estimate.standard_errors
            second = (repr(e[1]), repr(s[1])) if len(e) > 1 else ("nan", "nan")
            w.writerow([repr(r.amplitude), repr(e[0]), repr(s[0]), *second])
    return path


@dataclass
class DifferenceSeries:
    times: np.ndarray
    diff: np.ndarray = field(repr=False)

    @property
    def max(self) -> float:
        return float(self.diff.max()) if self.diff.size else 0.0


def trajectory_difference(p: SuarezSchopfParams, f: ForcingSpec, seed1: HistorySegment,
                          seed2: HistorySegment, t_end: float, step: float = 1.0e-4,
                          stride: int = 100, chunk: float = 200.0) -> DifferenceSeries:
    """``|x1(t) - x2(t)|`` for two seeds integrated side by side on one grid."""
    if abs(seed1.delay - seed2.delay) > 1e-12 * seed1.delay:
        raise ConfigurationError("seeds must share the delay")
    if seed1.dim != 1 or seed2.dim != 1:
        raise ConfigurationError("seeds must be scalar histories")
    stepper = StepperConfig(step)
    m = stepper.snapped_m(p.tau)
    both = HistorySegment.stack([seed1.resample(m), seed2.resample(m)])
    ts, ds = [], []

    def collect(traj):
        first = 0 if not ts else stride
        st = traj.states[first::stride]
        ts.append(traj.times[first::stride])
        ds.append(np.abs(st[:, 0] - st[:, 1]))

    _advance(ss_copies_system(p, 2, f), both, 0.0, t_end, stepper, chunk, collect)
    return DifferenceSeries(np.concatenate(ts), np.concatenate(ds))
