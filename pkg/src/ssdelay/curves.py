"""Bifurcation curves in the (tau, alpha) plane and the numerical hidden-curve scan."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .dde_core import HistorySegment, StepperConfig
from .errors import DomainError, ScanInconsistencyError
from .models import SuarezSchopfParams, dissipativity_radius, equilibria, ss_system
from .orbit_analysis import ProbeConfig, ProbeOutcome, period_to_years, run_probe


class CurveKind(str, Enum):
    NEUTRAL = "neutral"
    SQUEEZING = "squeezing"
    GAINED_NEUTRAL = "gained_neutral"
    LOWER_HIDDEN = "lower_hidden"
    UPPER_HIDDEN = "upper_hidden"


@dataclass(frozen=True)
class CurvePoint:
    alpha: float
    tau: float
    kind: CurveKind


def _check_neutral_alpha(alpha: float) -> None:
    if not (0.5 < alpha < 1.0):
        raise DomainError(f"purely imaginary roots need alpha in (0.5, 1), got {alpha}")


def imaginary_root_frequency(alpha: float) -> float:
    """Frequency ``zeta`` of the purely imaginary pair on the neutral curve."""
    _check_neutral_alpha(alpha)
    c = 3.0 * alpha - 2.0
    return math.sqrt(alpha * alpha - c * c)


def neutral_curve_tau(alpha: float) -> float:
    """Delay at which the symmetric equilibria first lose stability."""
    _check_neutral_alpha(alpha)
    c = 3.0 * alpha - 2.0
    return math.acos(c / alpha) / math.sqrt(alpha * alpha - c * c)


def squeezing_curve_tau(alpha: float) -> float:
    """Delay where ``lambda1 + lambda2 = 0`` at the zero equilibrium."""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"squeezing curve needs alpha in (0, 1), got {alpha}")
    s = math.sqrt(1.0 - alpha * alpha)
    return math.log((1.0 + s) / alpha) / s


def gained_neutral_curve_tau(alpha: float, mu: float, printed: bool = False) -> float:
    """Neutral curve of the linear part ``(3 alpha - 2 + mu, -alpha)``.

    ``printed=True`` evaluates the variant without the square root in the
    denominator; it is kept only for comparison.
    """
    if not (-4.0 * alpha + 2.0 < mu < -2.0 * alpha + 2.0):
        raise DomainError(f"need -4 alpha + 2 < mu < -2 alpha + 2, got alpha={alpha}, mu={mu}")
    c = 3.0 * alpha - 2.0 + mu
    den = alpha * alpha - c * c
    return math.acos(c / alpha) / (den if printed else math.sqrt(den))


def curve_points(kind: CurveKind, alphas) -> list[CurvePoint]:
    fn = {CurveKind.NEUTRAL: neutral_curve_tau, CurveKind.SQUEEZING: squeezing_curve_tau}[kind]
    return [CurvePoint(float(a), fn(float(a)), kind) for a in alphas]


def write_curves_csv(path, points) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "alpha", "tau"])
        for p in points:
            w.writerow([p.kind.value, repr(p.alpha), repr(p.tau)])
    return path


# --------------------------------------------------------------------------
# Hidden-curve scan
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanConfig:
    tolerance: float = 0.01
    max_steps: int = 30
    probe: ProbeConfig = ProbeConfig()
    small_constants: tuple = (5e-3, 1e-2, 1.5e-2, 2e-2)
    small_linear_amp: float = 1e-2
    delta_days: float = 400.0
    threads: int = 1


@dataclass
class HiddenScanResult:
    alpha: float
    tau_min: float
    tau_max: float
    period_at_tau_max: float
    period_years: float
    scan_tolerance: float
    samples: list = field(default_factory=list, repr=False)

    def row(self) -> list:
        return [self.alpha, self.tau_min, self.tau_max, self.period_at_tau_max, self.period_years]


def write_scan_csv(path, results) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "tau_min", "tau_max", "sigma", "sigma_years"])
        for r in results:
            w.writerow([repr(float(v)) for v in r.row()])
    return path


def self_excitation_seeds(tau: float, m: int, cfg: ScanConfig):
    """Small histories around the zero equilibrium used by the self-excitation test."""
    seeds = []
    for c in cfg.small_constants:
        seeds.append((f"const:{c:g}", HistorySegment.constant(c, tau, m)))
        seeds.append((f"const:{-c:g}", HistorySegment.constant(-c, tau, m)))
    a = cfg.small_linear_amp
    for v0, v1 in ((-a, a), (a, -a), (0.0, a), (0.0, -a)):
        seeds.append((f"linear:{v0:g},{v1:g}", HistorySegment.linear(v0, v1, tau, m)))
    return seeds


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


class _Predicates:
    def __init__(self, alpha: float, cfg: ScanConfig):
        self.alpha = alpha
        self.cfg = cfg
        self.samples: list[dict] = []
        self._orbit_cache: dict[float, ProbeOutcome] = {}

    def _setup(self, tau):
        p = SuarezSchopfParams(self.alpha, tau)
        m = StepperConfig(self.cfg.probe.step).snapped_m(tau)
        return p, m, ss_system(p), equilibria(p)

    def orbit(self, tau: float) -> ProbeOutcome:
        if tau not in self._orbit_cache:
            p, m, rhs, eqs = self._setup(tau)
            g = dissipativity_radius(p) + 0.5
            self._orbit_cache[tau] = run_probe(rhs, HistorySegment.constant(g, tau, m),
                                               f"const:{g:g}", eqs, self.cfg.probe)
        return self._orbit_cache[tau]

    def orbit_exists(self, tau: float) -> bool:
        res = self.orbit(tau)
        val = res.kind == "periodic"
        self.samples.append(dict(predicate="orbit_exists", tau=tau, value=val, outcome=res.kind))
        return val

    def self_excited(self, tau: float) -> bool:
        p, m, rhs, eqs = self._setup(tau)
        seeds = self_excitation_seeds(tau, m, self.cfg)
        outs = _map(lambda s: run_probe(rhs, s[1], s[0], eqs, self.cfg.probe), seeds, self.cfg.threads)
        val = any(o.kind == "periodic" for o in outs)
        self.samples.append(dict(predicate="self_excited", tau=tau, value=val,
                                 outcome=[o.kind for o in outs]))
        return val


def _bisect(pred, lo: float, hi: float, cfg: ScanConfig, name: str, samples) -> float:
    """Smallest tau where ``pred`` turns true, assuming false at lo and true at hi."""
    if pred(lo):
        raise ScanInconsistencyError(f"{name} already true at bracket start {lo}", samples)
    if not pred(hi):
        raise ScanInconsistencyError(f"{name} still false at bracket end {hi}", samples)
    steps = 0
    while hi - lo > cfg.tolerance and steps < cfg.max_steps:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
        steps += 1
    return 0.5 * (lo + hi)


def _check_monotone(samples) -> None:
    for name in ("orbit_exists", "self_excited"):
        pts = sorted((s["tau"], s["value"]) for s in samples if s["predicate"] == name)
        seen_true = False
        for tau, val in pts:
            if val:
                seen_true = True
            elif seen_true:
                raise ScanInconsistencyError(f"{name} is not monotone in tau near {tau}", samples)
    exists = {s["tau"]: s["value"] for s in samples if s["predicate"] == "orbit_exists"}
    for s in samples:
        if s["predicate"] == "self_excited" and s["value"] and exists.get(s["tau"]) is False:
            raise ScanInconsistencyError(
                f"self-excited orbit found at tau={s['tau']} where the outside seed found none", samples)


def hidden_curve_scan(alpha: float, tau_bracket: tuple[float, float],
                      config: ScanConfig | None = None) -> HiddenScanResult:
    """Locate the lower (orbit appears) and upper (orbit becomes self-excited)
    hidden curves at fixed ``alpha`` by bisection in ``tau``."""
    cfg = config or ScanConfig()
    lo, hi = map(float, tau_bracket)
    if not (0.0 < lo < hi):
        raise DomainError(f"tau bracket must satisfy 0 < lo < hi, got {tau_bracket}")
    pr = _Predicates(alpha, cfg)
    tau_min = _bisect(pr.orbit_exists, lo, hi, cfg, "orbit_exists", pr.samples)
    # the upper curve lies above the lower one
    tau_max = _bisect(pr.self_excited, max(lo, tau_min - cfg.tolerance), hi, cfg,
                      "self_excited", pr.samples)
    tau_sigma = tau_max + 2.0 * cfg.tolerance
    res = pr.orbit(tau_sigma)
    pr.samples.append(dict(predicate="orbit_exists", tau=tau_sigma, value=res.kind == "periodic",
                           outcome=res.kind))
    _check_monotone(pr.samples)
    if res.estimate is None:
        raise ScanInconsistencyError(f"no orbit detected at tau={tau_sigma} above the upper curve",
                                     pr.samples)
    sigma = res.estimate.period
    return HiddenScanResult(alpha, tau_min, tau_max, sigma,
                            period_to_years(sigma, tau_sigma, cfg.delta_days), cfg.tolerance,
                            pr.samples)


def default_bracket(alpha: float) -> tuple[float, float]:
    """Between the squeezing and neutral curves when both exist."""
    return squeezing_curve_tau(alpha), neutral_curve_tau(alpha)

