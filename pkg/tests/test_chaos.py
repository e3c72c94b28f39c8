import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssdelay import chaos
from ssdelay.dde_core import HistorySegment
from ssdelay.errors import ConfigurationError
from ssdelay.models import ForcingSpec, SuarezSchopfParams
from ssdelay.spectral import SpectralProjector


def test_amplitude_grid_is_half_open():
    g = chaos.amplitude_grid((0.068, 0.075), 1e-4)
    assert len(g) == 70
    assert g[0] == 0.068 and g[-1] < 0.075
    assert chaos.amplitude_grid((0.07, 0.07), 1e-4).size == 0
    assert chaos.amplitude_grid((0.08, 0.07), 1e-4).size == 0
    with pytest.raises(ConfigurationError):
        chaos.amplitude_grid((0.0, 1.0), 0.0)


def test_empty_sweep_gives_empty_table(tmp_path):
    rows = chaos.amplitude_sweep(SuarezSchopfParams(0.75, 1.596), (0.07, 0.07))
    assert rows == []
    path = chaos.write_sweep_csv(tmp_path / "s.csv", rows)
    assert path.read_text().splitlines() == ["A,lambda1,stderr1,lambda2,stderr2"]


def test_poincare_collapses_without_forcing(tmp_path):
    p = SuarezSchopfParams(0.75, 1.0)
    seed = HistorySegment.constant(0.3, 1.0, 100)
    ps = chaos.poincare_iterations(p, ForcingSpec(0.0, 1.0), seed, 300.0, 400.0, step=1e-2)
    assert ps.samples.shape == (len(ps.times), 2)
    assert len(ps.times) >= 10
    assert np.max(np.ptp(ps.samples, axis=0)) < 1e-6
    # the equilibrium 0.5 is a constant history, whose projection is fixed by the projector
    proj = SpectralProjector(0.75, 1.0, 100)
    np.testing.assert_allclose(ps.samples[-1], proj.coords_of_values(np.full(101, 0.5)), atol=1e-6)
    lines = ps.write_csv(tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "k,t,c1,c2" and len(lines) == len(ps.times) + 1


@settings(max_examples=20)
@given(st.floats(-5, 5), st.floats(-1, 1), st.floats(-1, 1))
def test_projection_is_linear_in_segment(s, a, b):
    proj = SpectralProjector(0.75, 1.58, 158)
    v = HistorySegment.linear(a, b, 1.58, 158).values[:, 0]
    c = proj.coords_of_values(v)
    np.testing.assert_allclose(proj.coords_of_values(s * v), s * np.asarray(c), atol=1e-12)


def test_poincare_validation():
    p = SuarezSchopfParams(0.75, 1.0)
    with pytest.raises(ConfigurationError):
        chaos.poincare_iterations(p, ForcingSpec(0.0, 1.0), HistorySegment.constant(0.0, 1.0, 10),
                                  5.0, 1.0)
    with pytest.raises(ConfigurationError):
        chaos.poincare_iterations(p, ForcingSpec(0.0, 1.0), HistorySegment.constant(0.0, 2.0, 10),
                                  0.0, 10.0)


def test_identical_seeds_have_zero_difference():
    p = SuarezSchopfParams(0.75, 1.596)
    s = HistorySegment.constant(5.0, 1.596, 100)
    d = chaos.trajectory_difference(p, ForcingSpec(0.073, 1.0), s, s, 200.0, step=1e-2, stride=10)
    assert d.max == 0.0
    assert d.times[0] == 0.0 and d.times[-1] == pytest.approx(200.0, abs=10 * 1e-2)
    assert np.all(np.diff(d.times) > 0)


def test_lyapunov_validation():
    p = SuarezSchopfParams(0.75, 1.58)
    seed = HistorySegment.constant(0.5, 1.58, 158)
    with pytest.raises(ConfigurationError):
        chaos.lyapunov_exponents(p, ForcingSpec(0.0, 1.0), seed, k=4)
    with pytest.raises(ConfigurationError):
        chaos.lyapunov_exponents(p, ForcingSpec(0.0, 1.0), seed,
                                 config=chaos.ChaosConfig(renorm_interval=0.0))


def test_lyapunov_at_stable_equilibrium_matches_leading_root():
    # near +0.5 the largest exponent is the real part of the leading characteristic root
    p = SuarezSchopfParams(0.75, 1.58)
    cfg = chaos.ChaosConfig(step=1e-2, transient=100.0, horizon=400.0)
    est = chaos.lyapunov_exponents(p, ForcingSpec(0.0, 1.0), HistorySegment.constant(0.5, 1.58, 158),
                                   k=2, config=cfg)
    assert est.exponents[0] == pytest.approx(-0.050268, abs=5e-3)
    assert est.exponents[0] >= est.exponents[1]
    assert len(est.standard_errors) == 2


def test_sweep_csv_row_format(tmp_path):
    est = chaos.LyapunovEstimate([0.08, -0.18], [0.001, 0.002], 10.0, 1.0)
    rows = [chaos.SweepRow(0.07, est), chaos.SweepRow(0.0701, None, "DivergenceError: x")]
    lines = chaos.write_sweep_csv(tmp_path / "s.csv", rows).read_text().splitlines()
    assert lines[1] == "0.07,0.08,0.001,-0.18,0.002"
    assert lines[2].startswith("0.0701,nan")
