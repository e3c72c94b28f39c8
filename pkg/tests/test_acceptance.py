"""Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned.

Several checks integrate for minutes; they are marked ``slow``.
"""

import math

import numpy as np
import pytest

from ssdelay import chaos, curves, models, orbit_analysis, ring_array, spectral
from ssdelay.dde_core import DelayRhs, HistorySegment, StepperConfig, integrate
from ssdelay.models import ForcingSpec, GainFamilyParams, RingParams, SuarezSchopfParams
from ssdelay.spectral import Form, SpectralProjector, TransferFunction

from test_dde_core import _neg_delay, exact_pieces, exact_value


def _within(x, target, tol):
    return x is not None and abs(x - target) <= tol


def test_c01_neutral_curve(report):
    tau = curves.neutral_curve_tau(0.75)
    assert report("C1 neutral curve", _within(tau, 1.741, 0.002), f"tau(0.75) = {tau:.5f}, want 1.741 +- 0.002")


def test_c02_curve_cross_checks(report):
    alphas = np.linspace(0.52, 0.94, 10)
    worst_re = max(abs(spectral.symmetric_complex_roots(a, curves.neutral_curve_tau(a), 1)[0].real)
                   for a in alphas)
    worst_sum = 0.0
    for a in alphas:
        l1, l2 = spectral.leading_real_roots(a, curves.squeezing_curve_tau(a))
        worst_sum = max(worst_sum, abs(l1.real + l2.real))
    ok = worst_re <= 1e-6 and worst_sum <= 1e-6
    assert report("C2 curve cross-checks", ok,
                  f"max |Re| = {worst_re:.2e}, max |l1+l2| = {worst_sum:.2e} (both <= 1e-6)")


@pytest.mark.slow
def test_c03_self_excited_orbit(report):
    res = orbit_analysis.classify_attractor(SuarezSchopfParams(0.75, 1.65))
    sigma = None if res.estimate is None else res.estimate.period
    years = None if sigma is None else orbit_analysis.period_to_years(sigma, 1.65)
    ok = (res.verdict == "periodic" and res.provenance == "self_excited"
          and _within(sigma, 12.3, 0.2) and _within(years, 8.17, 0.15))
    assert report("C3 self-excited orbit", ok,
                  f"{res.verdict}/{res.provenance}, sigma = {sigma}, years = {years} "
                  f"(want 12.3 +- 0.2, 8.17 +- 0.15)")


@pytest.mark.slow
def test_c04_hidden_orbit(report):
    res = orbit_analysis.classify_attractor(SuarezSchopfParams(0.75, 1.58))
    sigma = None if res.estimate is None else res.estimate.period
    small = res.small_outcomes
    small_ok = len(small) >= 24 and all(o.kind == "equilibrium" and o.equilibrium in (1, 2) for o in small)
    linear_ok = {"outside linear:-0.036,0.036", "outside linear:0.036,-0.036"} <= set(res.localized_by)
    ok = (res.verdict == "periodic" and res.provenance == "hidden" and small_ok and linear_ok
          and _within(sigma, 15.3, 0.3))
    assert report("C4 hidden orbit", ok,
                  f"{res.verdict}/{res.provenance}, sigma = {sigma} (want 15.3 +- 0.3), "
                  f"{len(small)} small seeds all at +-0.5: {small_ok}, localized by linear +-0.036: {linear_ok}")


@pytest.mark.slow
@pytest.mark.parametrize("alpha,bracket,want", [
    (0.50, (3.0, 5.0), (3.73, 4.19, 19.2, 0.1, 0.1, 0.5)),
    (0.45, (4.5, 7.0), (5.19, 6.43, 24.75, 0.15, 0.15, 0.7)),
])
def test_c05_hidden_curve_rows(report, alpha, bracket, want):
    lo, hi, sig, tlo, thi, tsig = want
    res = curves.hidden_curve_scan(alpha, bracket)
    ok = (_within(res.tau_min, lo, tlo) and _within(res.tau_max, hi, thi)
          and _within(res.period_at_tau_max, sig, tsig))
    assert report(f"C5 hidden-curve row alpha={alpha}", ok,
                  f"tau_min = {res.tau_min:.3f}, tau_max = {res.tau_max:.3f}, "
                  f"sigma = {res.period_at_tau_max:.3f} (want {lo}/{hi}/{sig})")


def test_c06_frequency_certification(report):
    tf = TransferFunction("gained_symmetric", 0.75, 1.58)
    rep = spectral.frequency_check(tf, 0.88, 0.45, Form.MODULUS)
    gap = spectral.count_roots_right_of(spectral.symmetric_linearization(0.75, 1.58), 0.88)
    ok = 0.60 < rep.extremum <= 0.65 and rep.holds and gap.count_right == 2
    assert report("C6 frequency certification", ok,
                  f"sup = {rep.extremum:.4f} (want in (0.60, 0.65]), holds = {rep.holds}, "
                  f"roots right of -0.88 = {gap.count_right}")


def test_c07_root_estimates(report):
    r = spectral.symmetric_complex_roots(0.75, 1.58, 2)
    d1 = abs(r[0].value - complex(-0.05, 0.75))
    d2 = abs(r[1].value - complex(-1.2, 4.78))
    ok = (abs(r[0].real + 0.05) <= 0.01 and abs(r[0].imag - 0.75) <= 0.01
          and abs(r[1].real + 1.2) <= 0.03 and abs(r[1].imag - 4.78) <= 0.03)
    assert report("C7 root estimates", ok, f"{r[0].value:.5f} (|d| {d1:.4f}), {r[1].value:.5f} (|d| {d2:.4f})")


@pytest.mark.slow
def test_c08_continuation(report):
    # reference period: the hidden orbit at (0.75, 1.58) as measured by the classifier
    ref = orbit_analysis.classify_attractor(SuarezSchopfParams(0.75, 1.58))
    g = GainFamilyParams(SuarezSchopfParams(0.75, 1.58), 0.45, 0.005)
    steps = orbit_analysis.continuation_run(g, [0.0, 0.25, 0.5, 0.75, 1.0])
    last = steps[-1]
    ref_sigma = ref.estimate.period if ref.estimate else math.nan
    ok = last.epsilon == 1.0 and abs(last.estimate.period - ref_sigma) <= 0.02 * ref_sigma
    periods = ", ".join(f"{s.estimate.period:.3f}" for s in steps)
    assert report("C8 continuation", ok,
                  f"periods along schedule [{periods}], reference sigma = {ref_sigma:.4f} (2 %)")


@pytest.mark.slow
def test_c09_forced_chaos(report):
    p = SuarezSchopfParams(0.75, 1.596)
    m = StepperConfig(1e-4).snapped_m(p.tau)
    est = chaos.lyapunov_exponents(p, ForcingSpec(0.073, 1.0), HistorySegment.constant(5.0, p.tau, m))
    l1, l2 = est.exponents
    ok_forced = 0.03 <= l1 <= 0.12 and -0.25 <= l2 <= -0.10
    # unforced reference near the symmetric equilibrium +0.5; no transient is needed there
    q = SuarezSchopfParams(0.75, 1.58)
    cfg = chaos.ChaosConfig(step=1e-3, transient=200.0, horizon=2000.0)
    est0 = chaos.lyapunov_exponents(q, ForcingSpec(0.0, 1.0), HistorySegment.constant(0.51, q.tau, 1580),
                                    config=cfg)
    ok_free = _within(est0.exponents[0], -0.05, 0.01)
    assert report("C9 forced chaos", ok_forced and ok_free,
                  f"A=0.073: l1 = {l1:.4f} +- {est.standard_errors[0]:.4f}, l2 = {l2:.4f} "
                  f"(want [0.03, 0.12], [-0.25, -0.10]); A=0: l1 = {est0.exponents[0]:.4f} (want -0.05 +- 0.01)")


@pytest.mark.slow
def test_c10_sensitive_dependence(report):
    p = SuarezSchopfParams(0.75, 1.596)
    m = StepperConfig(1e-4).snapped_m(p.tau)
    d = chaos.trajectory_difference(p, ForcingSpec(0.073, 1.0), HistorySegment.constant(5.0, p.tau, m),
                                    HistorySegment.constant(5.0 + 1e-5, p.tau, m), 10000.0)
    first = d.times[np.argmax(d.diff > 0.5)] if d.max > 0.5 else None
    assert report("C10 sensitive dependence", d.max > 0.5,
                  f"max |x1 - x2| on [0, 10000] = {d.max:.4f}, first exceeds 0.5 at t = {first}")


@pytest.mark.slow
def test_c11_ring_array(report):
    rp = RingParams(**models.REFERENCE_RING)
    m = StepperConfig(1e-4).snapped_m(rp.tau)
    s1 = HistorySegment.from_function(lambda th: 4 * np.cos(th) + 4, rp.tau, m,
                                      derivative=lambda th: -4 * np.sin(th))
    s2 = HistorySegment.from_function(lambda th: -3 * np.exp(th) + 3, rp.tau, m,
                                      derivative=lambda th: -3 * np.exp(th))
    cfg = ring_array.RingConfig()
    probes = ring_array.probe_zero_neighbourhood(rp, cfg)
    rep = ring_array.classify_ring_regime(rp, [s1, s2], cfg, probes)
    swp = ring_array.classify_ring_regime(rp, [s2, s1], cfg, probes)
    same = ring_array.simulate_ring(rp, [s1, s1], 300.0, step=1e-3)
    sync = ring_array.synchrony_measure(same.states)
    mirrored = ring_array.RegimeFingerprint(swp.fingerprint.periods[::-1], swp.fingerprint.maxima[::-1],
                                            swp.fingerprint.minima[::-1])
    per_ok = (rep.period is not None and swp.period is not None
              and abs(rep.period - swp.period) <= 1e-3 * rep.period)
    ok = (rep.verdict == "asynchronous" and rep.provenance == "hidden" and swp.verdict == "asynchronous"
          and rep.fingerprint.matches(mirrored) and per_ok and sync <= 1e-8)
    assert report("C11 ring array", ok,
                  f"{rep.verdict}/{rep.provenance}, period {rep.period}; swapped {swp.verdict} period "
                  f"{swp.period}, mirrored fingerprint {rep.fingerprint.matches(mirrored)}; "
                  f"identical seeds synchrony {sync:.1e}")


def test_c12_property_suites(report):
    # integrator: fourth order on x' = -x(t - 1)
    pieces = exact_pieces(8)
    rhs = DelayRhs(1, _neg_delay, np.zeros(1))
    errs = []
    for h in (0.1, 0.05, 0.025, 0.0125):
        traj = integrate(rhs, HistorySegment.constant(1.0, 1.0, 10), (0.0, 8.0), StepperConfig(h))
        errs.append(np.max(np.abs(traj.states[:, 0] - exact_value(pieces, traj.times))))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    conv_ok = all(r >= 12.0 for r in ratios)

    # projector idempotency
    rng = np.random.default_rng(1)
    proj = SpectralProjector(0.75, 1.58, 1580)
    e1, e2 = proj.eigenfunction(0), proj.eigenfunction(1)
    worst = 0.0
    for _ in range(100):
        v = rng.normal(size=1581).cumsum() * 0.05 + rng.normal()
        c1, c2 = proj.coords_of_values(v)
        d1, d2 = proj.coords_of_values(c1 * e1 + c2 * e2)
        worst = max(worst, abs(d1 - c1) / (1 + abs(c1)), abs(d2 - c2) / (1 + abs(c2)))
    idem_ok = worst <= 1e-8

    # oddness and ring equivariance, bitwise
    p = SuarezSchopfParams(0.75, 1.58)
    rp = RingParams(3, -1.0, 60.0, 0.01, 2.4, 0.01)
    xs = rng.uniform(-5, 5, size=(200, 2))
    odd_ok = all(models.ss_rhs(-a, -b, p) == -models.ss_rhs(a, b, p) for a, b in xs)
    eq_ok = True
    for _ in range(200):
        x, xd = rng.uniform(-5, 5, 3), rng.uniform(-5, 5, 3)
        base = models.ring_rhs(x, xd, rp)
        eq_ok &= np.array_equal(models.ring_rhs(np.roll(x, 1), np.roll(xd, 1), rp), np.roll(base, 1))
        eq_ok &= np.array_equal(models.ring_rhs(-x, -xd, rp), -base)

    # positive invariance of the dissipativity ball
    sysf = models.ss_system(p)
    inv_ok = True
    for _ in range(100):
        R = rng.uniform(0.0, 1.0)
        bound = models.dissipativity_radius(p) + R
        c, w = rng.normal(size=3), rng.uniform(0.5, 4.0, size=3)
        th = np.linspace(-p.tau, 0.0, 159)
        raw = sum(ci * np.sin(wi * th + i) for i, (ci, wi) in enumerate(zip(c, w)))
        s = bound * rng.uniform(0.2, 1.0) / np.max(np.abs(raw))
        seg = HistorySegment.from_function(
            lambda t: s * sum(ci * np.sin(wi * t + i) for i, (ci, wi) in enumerate(zip(c, w))), p.tau, 158,
            derivative=lambda t: s * sum(ci * wi * np.cos(wi * t + i) for i, (ci, wi) in enumerate(zip(c, w))))
        traj = integrate(sysf, seg, (0.0, 10.0), StepperConfig(0.01))
        inv_ok &= bool(np.max(np.abs(traj.states)) <= bound + 1e-6)

    ok = conv_ok and idem_ok and odd_ok and eq_ok and inv_ok
    assert report("C12 property suites", ok,
                  f"convergence ratios {[round(float(r), 2) for r in ratios]}, idempotency {worst:.1e}, "
                  f"oddness {odd_ok}, equivariance {eq_ok}, S_R invariance {inv_ok}")
