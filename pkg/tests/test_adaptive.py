import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qrx.adaptive import (
    ON_OFF,
    PNRD,
    AdaptivePolicy,
    adaptive_error_exact,
    adaptive_error_mc,
    adaptive_leaf_weights,
    adaptive_success_by_candidate,
    bayes_update,
    column_policy,
    full_policy,
    hybrid_adaptive_error,
    map_index,
)
from qrx.bounds import sql_error, srm_error_of_states
from qrx.constellation import build_constellation, constellation_for_mean_photon
from qrx.physics import IDEAL, DetectorModel, Splitter
from qrx.staged import TYPE_II, StagedReceiverConfig, hybrid_error


def three_sigma(stats, p):
    return abs(stats.p_hat - p) <= 3 * math.sqrt(p * (1 - p) / stats.trials)


def test_policy_validation():
    with pytest.raises(ValueError):
        AdaptivePolicy([])
    with pytest.raises(ValueError):
        AdaptivePolicy([0, 1], N=0)
    with pytest.raises(ValueError):
        AdaptivePolicy([0, 1], detector_kind="bolometer")


def test_map_tie_break_lowest_index():
    np.testing.assert_array_equal(map_index(np.array([[0.2, 0.4, 0.4], [0.5, 0.1, 0.5], [1, 1, 1]])), [1, 0, 0])
    # differences at round-off level still count as ties
    assert map_index(np.array([0.3, 0.3 + 1e-15]))[0] == 0


@settings(max_examples=50)
@given(st.lists(st.floats(1e-6, 1), min_size=2, max_size=16), st.data())
def test_posterior_normalised(prior, data):
    prior = np.array(prior) / np.sum(prior)
    lik = np.array(data.draw(st.lists(st.floats(1e-6, 1), min_size=len(prior), max_size=len(prior))))
    post = bayes_update(prior[None, :], lik[None, :])
    assert abs(post.sum() - 1) <= 1e-12


def test_single_candidate():
    assert adaptive_error_exact(AdaptivePolicy([1 + 1j], N=5)) == 0.0


@pytest.mark.parametrize("N", [1, 2, 5, 10])
@pytest.mark.parametrize("a", [0.3, 1.0, 1.7 - 0.4j])
def test_kennedy_two_hypotheses(N, a):
    # null 0 first; a single click reveals a and the MAP never returns to 0
    err = adaptive_error_exact(AdaptivePolicy([0, a], N=N))
    assert err == pytest.approx(math.exp(-abs(a) ** 2) / 2, abs=1e-14)


@pytest.mark.parametrize("policy", [
    AdaptivePolicy(constellation_for_mean_photon(4, 2.0).points, N=6, det=DetectorModel(0.8, 0.01)),
    column_policy(0.7, 4, 10, IDEAL),
    AdaptivePolicy([0, 1, 1j, -1.5], N=8, det=DetectorModel(1.0, 0.02)),
])
def test_leaf_weights_sum_to_one(policy):
    w = adaptive_leaf_weights(policy)
    priors = np.full(policy.M, 1 / policy.M)
    np.testing.assert_allclose(w.sum(axis=0) / priors, 1.0, atol=1e-10)


def test_success_by_candidate_consistent():
    pol = column_policy(0.8, 4, 10, DetectorModel(0.9, 0.005))
    succ = adaptive_success_by_candidate(pol)
    assert np.all((succ >= 0) & (succ <= 1))
    assert 1 - succ.mean() == pytest.approx(adaptive_error_exact(pol), abs=1e-14)


def test_exact_rejects_pnrd_and_long_records():
    with pytest.raises(ValueError):
        adaptive_error_exact(AdaptivePolicy([0, 1], detector_kind=PNRD))
    with pytest.raises(ValueError):
        adaptive_error_exact(AdaptivePolicy([0, 1], N=21))


@pytest.mark.parametrize("kind", [ON_OFF, PNRD])
def test_zero_amplitude_candidates(kind):
    priors = np.array([0.1, 0.5, 0.15, 0.25])
    pol = AdaptivePolicy(np.zeros(4), N=6, detector_kind=kind)
    stats = adaptive_error_mc(pol, priors, trials=20_000, seed=5)
    assert stats.p_hat == pytest.approx(0.5, abs=0.015)
    if kind == ON_OFF:
        assert adaptive_error_exact(pol, priors) == pytest.approx(1 - priors.max(), abs=1e-14)


def test_mc_seed_determinism():
    pol = AdaptivePolicy(constellation_for_mean_photon(4, 3.0).points, N=10, detector_kind=PNRD)
    a = adaptive_error_mc(pol, trials=20_000, seed=11)
    b = adaptive_error_mc(pol, trials=20_000, seed=11, threads=3)
    c = adaptive_error_mc(pol, trials=20_000, seed=12)
    assert a == b
    assert a != c


def test_exact_vs_mc_16qam():
    c = constellation_for_mean_photon(4, 2.0)
    pol = full_policy(c, 10, IDEAL)
    stats = adaptive_error_mc(pol, trials=1_000_000, seed=2)
    assert three_sigma(stats, adaptive_error_exact(pol))


@pytest.mark.parametrize("ns, eta, nu", [(0.5, 1.0, 0.0), (1.0, 0.8, 0.01), (4.0, 1.0, 0.0), (8.0, 0.9, 0.005), (12.0, 1.0, 0.0)])
def test_exact_vs_mc_on_off_grid(ns, eta, nu):
    c = constellation_for_mean_photon(4, ns)
    pol = column_policy(c.alpha, 4, 10, DetectorModel(eta, nu))
    stats = adaptive_error_mc(pol, trials=1_000_000, seed=17)
    assert three_sigma(stats, adaptive_error_exact(pol))


@pytest.mark.parametrize("ns", [0.5, 2.0, 5.0, 10.0, 15.0])
def test_exact_above_srm(ns):
    c = constellation_for_mean_photon(4, ns)
    full = full_policy(c, 10, IDEAL)
    assert adaptive_error_exact(full) >= srm_error_of_states(full.candidates)
    col = column_policy(c.alpha, 4, 10, IDEAL)
    assert adaptive_error_exact(col) >= srm_error_of_states(col.candidates)


def test_type3_degenerate():
    c = build_constellation(4, 0.0)
    assert hybrid_adaptive_error(Splitter(0.5), 10, IDEAL, ON_OFF, c) == pytest.approx(0.9375, abs=1e-12)


def test_type3_rejects():
    c = constellation_for_mean_photon(4, 1.0)
    with pytest.raises(ValueError):
        hybrid_adaptive_error(Splitter(0.5), 10, IDEAL, PNRD, c)
    with pytest.raises(ValueError):
        hybrid_adaptive_error(Splitter(0.5), 10, IDEAL, ON_OFF, constellation_for_mean_photon(3, 1.0))


def test_type3_not_worse_than_type2():
    for ns in np.linspace(2, 15, 14):
        c = constellation_for_mean_photon(4, ns)
        t3 = hybrid_adaptive_error(Splitter(0.5), 10, IDEAL, ON_OFF, c)
        t2 = hybrid_error(StagedReceiverConfig(order=TYPE_II), c)
        assert t3 <= t2


def test_type3_regression():
    # first verified run; exact tree enumeration, ideal detectors, N = 10, T = 0.5
    values = {2.0: 0.65778949315429, 8.0: 0.28067318269430, 15.0: 0.10109192530413}
    for ns, expected in values.items():
        c = constellation_for_mean_photon(4, ns)
        assert hybrid_adaptive_error(Splitter(0.5), 10, IDEAL, ON_OFF, c) == pytest.approx(expected, abs=1e-12)


def test_type4_does_not_beat_sql_on_grid():
    for ns in np.linspace(0.5, 15, 30):
        c = constellation_for_mean_photon(4, ns)
        assert adaptive_error_exact(full_policy(c, 10, IDEAL)) >= sql_error(c)
