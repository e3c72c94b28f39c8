import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ssdelay import orbit_analysis as oa
from ssdelay.dde_core import HistorySegment, StepperConfig, integrate
from ssdelay.errors import ConfigurationError, ContinuationBreakError
from ssdelay.models import GainFamilyParams, SuarezSchopfParams, ss_system


def test_sine_period_recovered():
    t = np.linspace(0, 200, 20001)
    est = oa.period_from_samples(t, 0.7 * np.sin(2 * np.pi * t / 12.3) + 0.1)
    assert est.period == pytest.approx(12.3, rel=1e-3)
    assert est.amplitude == pytest.approx(0.8, rel=1e-3)
    assert est.confidence > 0.99
    assert est.n_cycles >= 10


def test_non_oscillating_signals_give_none():
    t = np.linspace(0, 100, 1001)
    assert oa.period_from_samples(t, np.full_like(t, 0.5)) is None
    assert oa.period_from_samples(t, np.exp(-t)) is None
    # too few crossings
    assert oa.period_from_samples(t, np.sin(2 * np.pi * t / 60)) is None
    # chirp: cycle lengths vary far more than 5 %
    assert oa.period_from_samples(t, np.sin(0.02 * t ** 2)) is None


@given(st.floats(0, 50), st.floats(3, 20))
def test_period_invariant_under_time_shift(shift, period):
    t = np.linspace(0, 300, 30001)
    x = np.sin(2 * np.pi * t / period)
    a = oa.period_from_samples(t, x)
    b = oa.period_from_samples(t + shift, x)
    assert a.period == pytest.approx(b.period, rel=1e-9)


def test_period_conversions():
    assert oa.period_to_days(12.3, 1.65) == pytest.approx(2981.8, abs=0.1)
    assert oa.period_to_years(12.3, 1.65) == pytest.approx(8.17, abs=0.01)
    assert oa.period_to_years(1.7, 1.7, 365.0) == pytest.approx(1.0)
    assert oa.period_to_years(9.0, 2.0) * 365 == pytest.approx(oa.period_to_days(9.0, 2.0))
    with pytest.raises(ConfigurationError):
        oa.period_to_days(-1.0, 1.0)


def test_detect_periodic_orbit_validation():
    p = SuarezSchopfParams(0.75, 1.0)
    traj = integrate(ss_system(p), HistorySegment.constant(0.3, 1.0, 10), (0.0, 50.0),
                     StepperConfig(0.1))
    assert oa.detect_periodic_orbit(traj) is None
    with pytest.raises(ConfigurationError):
        oa.detect_periodic_orbit(traj, transient_fraction=1.0)


def test_probe_stops_early_at_equilibrium():
    p = SuarezSchopfParams(0.75, 1.0)
    cfg = oa.ProbeConfig(horizon=1000.0, step=1e-2)
    out = oa.run_probe(ss_system(p), HistorySegment.constant(0.3, 1.0, 100), "x",
                       [0.0, 0.5, -0.5], cfg)
    assert out.kind == "equilibrium" and out.equilibrium == 1
    assert out.final_distance < 1e-4
    assert out.t_final < 1000.0


def test_stable_region_classifies_as_equilibrium():
    cfg = oa.ClassifyConfig(probe=oa.ProbeConfig(horizon=600.0, step=1e-2))
    res = oa.classify_attractor(SuarezSchopfParams(0.75, 1.0), cfg)
    assert res.verdict == "equilibrium"
    assert res.provenance is None
    assert res.seeds_tried == 28 and len(res.small_outcomes) == 24
    assert set(res.equilibria_reached) <= {1, 2}
    assert '"verdict": "equilibrium"' in res.to_json()


def test_sign_symmetric_seeds_give_negated_trajectories():
    p = SuarezSchopfParams(0.75, 1.58)
    seed = HistorySegment.linear(-0.2, 0.4, 1.58, 158)
    a = integrate(ss_system(p), seed, (0.0, 30.0), StepperConfig(1e-2))
    b = integrate(ss_system(p), seed.scaled(-1.0), (0.0, 30.0), StepperConfig(1e-2))
    assert np.array_equal(a.states, -b.states)


def test_seed_families():
    near = oa.neighborhood_seeds(0.5, 1e-2, 1.58, 158)
    assert len(near) == 8
    for _, s in near:
        assert np.max(np.abs(s.values - 0.5)) <= 1e-2 + 1e-15
    outer = oa.outside_seeds(SuarezSchopfParams(0.75, 1.58), 158)
    labels = [lab for lab, _ in outer]
    assert "linear:-0.036,0.036" in labels and "linear:0.036,-0.036" in labels
    g = math.sqrt(1.75) + 0.5
    assert any(abs(s.values[0, 0] - g) < 1e-12 for _, s in outer)


def test_same_orbit():
    a = oa.PeriodEstimate(10.0, 1.0, 1.0)
    assert oa.same_orbit(a, oa.PeriodEstimate(10.1, 1.02, 1.0))
    assert not oa.same_orbit(a, oa.PeriodEstimate(11.0, 1.0, 1.0))
    assert not oa.same_orbit(a, oa.PeriodEstimate(10.0, 1.2, 1.0))


def test_continuation_schedule_validation():
    g = GainFamilyParams(SuarezSchopfParams(0.75, 1.58), 0.45, 0.005)
    for bad in ([0.0], [0.1, 1.0], [0.0, 0.5], [0.0, 0.6, 0.4, 1.0]):
        with pytest.raises(ConfigurationError):
            oa.continuation_run(g, bad)


def test_family_equilibria_include_symmetric_pair():
    g = GainFamilyParams(SuarezSchopfParams(0.75, 1.58), 0.45, 0.005, 1.0)
    eqs = oa._family_equilibria(g)
    assert eqs == pytest.approx([-0.5, 0.0, 0.5], abs=1e-9)


def test_continuation_break_is_reported():
    # in the stable region the gained orbit cannot survive to epsilon = 1
    g = GainFamilyParams(SuarezSchopfParams(0.75, 1.0), 0.45, 0.005)
    cfg = oa.ProbeConfig(horizon=400.0, step=1e-2)
    with pytest.raises(ContinuationBreakError) as exc:
        oa.continuation_run(g, [0.0, 1.0], cfg)
    assert 0.0 <= exc.value.epsilon <= 1.0
