import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from qsaw import rng
from qsaw.errors import NotNormalized
from qsaw.measurement import (
    MeasurementHistogram,
    auto_dropped_bits,
    coarse_marginal,
    coarse_sample,
    draw_counts,
    histogram_from_state,
    run_measurement_experiment,
    sample_momentum,
)
from qsaw.params import derive_params
from qsaw.propagator import MOMENTUM, StateVector, evolve, init_momentum_state, probabilities


@pytest.fixture
def state(fig1_params):
    return evolve(init_momentum_state(fig1_params), 15)


@given(st.integers(1, 6).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(0, n),
                        st.lists(st.floats(0, 1), min_size=2**n, max_size=2**n))))
def test_coarse_marginal_sums(args):
    n, b, w = args
    W = np.array(w)
    P = coarse_marginal(W, b)
    assert len(P) == 2 ** (n - b)
    assert P.sum() == pytest.approx(W.sum())
    assert P[0] == pytest.approx(W[: 2**b].sum())


def test_coarse_marginal_bounds():
    with pytest.raises(ValueError):
        coarse_marginal(np.ones(8) / 8, 4)


def test_histogram_bins(state):
    h = histogram_from_state(state, 1000, 2, seed=0)
    assert h.n_bins == 16 and h.bin_width == 4 and h.dropped_bits == 2
    assert h.bin_low_m()[0] == -32 and h.bin_high_m()[-1] == 31
    assert h.counts.sum() == 1000
    assert sum(h.count_map().values()) == 1000


def test_histogram_validation():
    with pytest.raises(ValueError):
        MeasurementHistogram(3, 3, np.zeros(3, int), 0)
    with pytest.raises(ValueError):
        MeasurementHistogram(3, 2, np.array([1, 0, 0, 0]), 2)


def test_deterministic_and_seed_dependent(state):
    a = histogram_from_state(state, 20_000, 0, seed=5).counts
    b = histogram_from_state(state, 20_000, 0, seed=5).counts
    c = histogram_from_state(state, 20_000, 0, seed=6).counts
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_counts_follow_born_rule(state):
    W = probabilities(state)
    counts = draw_counts(W, 200_000, seed=3)
    expected = W * 200_000
    big = expected > 5
    chi2 = np.sum((counts[big] - expected[big]) ** 2 / expected[big])
    assert stats.chi2.sf(chi2, big.sum() - 1) > 1e-3


def test_coarse_counts_follow_marginal(state):
    P = coarse_marginal(probabilities(state), 3)
    h = histogram_from_state(state, 100_000, 3, seed=9)
    expected = P * 100_000
    chi2 = np.sum((h.counts - expected) ** 2 / expected)
    assert stats.chi2.sf(chi2, len(P) - 1) > 1e-3


def test_single_shot_samplers(state):
    g = rng.stream(0, rng.MEASURE)
    m = sample_momentum(state, g)
    assert -32 <= m < 32
    ms = sample_momentum(state, g, size=50)
    assert ms.shape == (50,)
    b = coarse_sample(state, 2, g)
    assert 0 <= b < 16


def test_point_mass_always_measured():
    p = derive_params(K=1.0, k=1.0, n=4, m0=-3, boundary="cylinder")
    psi = init_momentum_state(p)
    ms = sample_momentum(psi, rng.stream(1, rng.MEASURE), size=100)
    assert np.all(ms == -3)


def test_not_normalized():
    p = derive_params(K=1.0, k=1.0, n=2, boundary="cylinder")
    psi = StateVector(np.ones(4), MOMENTUM, p)
    with pytest.raises(NotNormalized):
        sample_momentum(psi, rng.stream(0, rng.MEASURE))


@pytest.mark.parametrize("width, n, b", [(1, 6, 0), (7.9, 6, 0), (8, 6, 1), (20, 6, 2),
                                          (1000, 6, 6)])
def test_auto_dropped_bits(width, n, b):
    assert auto_dropped_bits(width, n) == b


def test_two_stage_protocol(fig1_params, state):
    h = run_measurement_experiment(fig1_params, 15, 3000, seed=2, final_state=state)
    meta = h.metadata
    assert meta["stage1_runs"] == 300
    assert h.dropped_bits == auto_dropped_bits(meta["stage1_width"], 6)
    assert h.n_runs == 3000


def test_experiment_evolves_when_needed(fig1_params, state):
    a = run_measurement_experiment(fig1_params, 15, 500, 1, seed=4)
    b = run_measurement_experiment(fig1_params, 15, 500, 1, seed=4, final_state=state)
    np.testing.assert_array_equal(a.counts, b.counts)
