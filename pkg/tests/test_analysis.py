import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qsaw.analysis import (
    FitReport,
    fit_anomalous_exponent,
    fit_diffusion_coefficient,
    fit_localization_length,
    gaussian_profile_check,
    inverse_participation_ratio,
    participation_number,
    rpa_diffusion,
    theoretical_localization,
)
from qsaw.classical import EnsembleMoments
from qsaw.errors import (
    InsufficientData,
    InsufficientSupport,
    NonDecaying,
    NonPositiveK,
    NonPositiveVariance,
)
from qsaw.measurement import MeasurementHistogram
from qsaw.params import derive_params


def exponential(N, ell, m0=0):
    m = np.arange(N) - N // 2
    W = np.exp(-2 * np.abs(m - m0) / ell)
    return W / W.sum()


def two_sided_geometric_xi(ell):
    """Closed form of 1/sum W^2 for W ~ r^|m| on the infinite lattice, r = exp(-2/ell)."""
    r = math.exp(-2 / ell)
    c = (1 - r) / (1 + r)
    return 1 / (c * c * (1 + r * r) / (1 - r * r))


@given(st.floats(1.0, 40.0), st.integers(-20, 20))
def test_exact_exponential_recovered(ell, m0):
    W = exponential(256, ell, m0)
    r = fit_localization_length(W, m0=m0)
    assert r.value == pytest.approx(ell, rel=1e-9)
    assert r.residual_rms < 1e-9
    assert r.diagnostics["asymmetric"] is False


def test_ipr_of_exponential_matches_closed_form():
    W = exponential(1024, 10.0)
    xi = participation_number(W)
    assert xi == pytest.approx(two_sided_geometric_xi(10.0), rel=1e-12)
    # coth(1/l)**2 / coth(2/l), about 19.87 for l = 10 (so 2*xi is near 4*l, not l)
    assert xi == pytest.approx(1 / math.tanh(0.1) ** 2 * math.tanh(0.2), rel=1e-12)
    assert inverse_participation_ratio(W).value == pytest.approx(2 * xi)


def test_ipr_uniform_and_delta():
    assert participation_number(np.full(64, 1 / 64)) == pytest.approx(64)
    d = np.zeros(8)
    d[3] = 1
    assert participation_number(d) == 1


def test_histogram_fit_recovers_length():
    W = exponential(64, 6.0)
    P = W.reshape(-1, 2).sum(axis=1)
    counts = np.round(P * 1e9).astype(np.int64)
    h = MeasurementHistogram(6, 2, counts, int(counts.sum()))
    r = fit_localization_length(h)
    assert r.value == pytest.approx(6.0, rel=0.02)


def test_histogram_ipr_uses_bin_width():
    counts = np.array([0, 10, 30, 0])
    h = MeasurementHistogram(3, 2, counts, 40)
    p = counts / 40
    assert participation_number(h) == pytest.approx(2 / np.sum(p**2))
    assert inverse_participation_ratio(h).std_error > 0


def test_fit_failures():
    with pytest.raises(NonDecaying):
        fit_localization_length(np.full(32, 1 / 32))
    W = np.zeros(32)
    W[16] = 1
    with pytest.raises(InsufficientSupport):
        fit_localization_length(W)


def test_asymmetry_flag():
    m = np.arange(64) - 32
    W = np.where(m < 0, np.exp(2 * m / 3.0), np.exp(-2 * m / 12.0))
    r = fit_localization_length(W / W.sum())
    assert r.diagnostics["asymmetric"] is True


def test_theory_values():
    p = derive_params(K=math.sqrt(2), n=6, L=10)
    assert theoretical_localization(p) == pytest.approx(math.pi**2 * p.k**2 / 3)
    assert theoretical_localization(p) == pytest.approx(6.8, rel=0.01)
    small = derive_params(K=1.45, n=3, L=5)
    with pytest.warns(UserWarning):
        theoretical_localization(small)


def test_rpa_branches():
    assert rpa_diffusion(math.sqrt(2)).value == pytest.approx(2 * math.pi**2 / 3)
    low = rpa_diffusion(0.5)
    assert low.regime == "cantori" and low.value == pytest.approx(3.3 * 0.5**2.5)
    assert rpa_diffusion(1.0).regime == "boundary"
    with pytest.raises(NonPositiveK):
        rpa_diffusion(0.0)


@given(st.floats(0.1, 50), st.floats(0, 10))
def test_diffusion_linear_data(D, v0):
    t = np.arange(0, 40)
    r = fit_diffusion_coefficient(t, v0 + D * t)
    assert r.value == pytest.approx(D, rel=1e-9)
    assert r.diagnostics["initial_variance"] == pytest.approx(v0)


def test_diffusion_accepts_moments():
    moments = [EnsembleMoments(t, 0.0, 2.0 * t, 100) for t in range(10)]
    r = fit_diffusion_coefficient(moments, units="levels")
    assert r.value == pytest.approx(2.0)
    assert r.diagnostics["units"] == "levels"


def test_diffusion_needs_data():
    with pytest.raises(InsufficientData):
        fit_diffusion_coefficient([1, 2], [1, 2])
    with pytest.raises(InsufficientData):
        fit_diffusion_coefficient([1, 3, 2], [1, 2, 3])


@given(st.floats(0.05, 2.0), st.floats(0.01, 100))
def test_anomalous_power_law(alpha, c):
    t = np.geomspace(10, 1e4, 30)
    r = fit_anomalous_exponent(t, c * t**alpha)
    assert r.value == pytest.approx(alpha, abs=1e-9)


def test_anomalous_window_rules():
    t = np.geomspace(1, 1e4, 40)
    v = t**0.5
    assert fit_anomalous_exponent(t, v, window=(100, 1e4)).n_points > 5
    with pytest.raises(InsufficientData):
        fit_anomalous_exponent(t, v, window=(100, 1000))
    with pytest.raises(InsufficientData):
        fit_anomalous_exponent(t[:4], v[:4])
    v[5] = 0
    with pytest.raises(NonPositiveVariance):
        fit_anomalous_exponent(t, v)


def test_gaussian_check():
    g = np.random.default_rng(0)
    ok = gaussian_profile_check(g.normal(0, math.sqrt(3 * 50), 20_000), 50, 3.0)
    assert ok.passed and ok.variance_ratio == pytest.approx(1, abs=0.05)
    bad = gaussian_profile_check(g.uniform(-30, 30, 20_000), 50, 6.0)
    assert not bad.passed
    with pytest.raises(InsufficientData):
        gaussian_profile_check(np.zeros(10), 50, 1.0)


def test_report_json_round_trip():
    r = FitReport("localization_length", 12.0, 0.5, (0.0, 20.0), 21, 0.1, {"slope": -0.16})
    d = json.loads(r.to_json())
    assert d["value"] == 12.0 and d["window"] == [0.0, 20.0]
    with pytest.raises(ValueError):
        FitReport("mass", 1.0, 0.0, (), 0)
    with pytest.raises(ValueError):
        FitReport("fidelity", math.nan, 0.0, (), 0)


def test_no_warning_for_large_k(fig1_params):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        theoretical_localization(fig1_params)
