import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qrx.bounds import helstrom_srm_error
from qrx.constellation import build_constellation, constellation_for_mean_photon, levels
from qrx.physics import DetectorModel, Splitter
from qrx.staged import (
    TYPE_I,
    TYPE_II,
    StagedReceiverConfig,
    displacement_stage_correct_probs_closed_form,
    displacement_stage_correct_probs_enumerated,
    displacement_stage_decision_matrix,
    first_probe_beta_sq,
    homodyne_row_correct_probs,
    hybrid_error,
    hybrid_error_od,
    parse_order,
    validate_order,
)

NS_GRID = np.linspace(2, 15, 14)


def state_machine_oracle(A, N, order, det, delta=0.0, L=4):
    """Decision matrix from walking every click record one slice at a time."""
    p = levels(L)
    D = np.zeros((L, L))
    for true in range(L):
        for record in itertools.product((False, True), repeat=N):
            pos, prob = 0, 1.0
            for click in record:
                diff = A * (p[true] - p[order[pos]]) - delta
                silent = math.exp(-det.nu - det.eta * diff * diff / N)
                prob *= (1 - silent) if click else silent
                if click and pos < L - 1:
                    pos += 1
            if pos == L - 1:
                D[true, order[-1]] += prob
            elif record[-1]:
                for j in order[pos:]:
                    D[true, j] += prob / (L - pos)
            else:
                D[true, order[pos]] += prob
    return D


def cfg_for(N, order=TYPE_I, eta=1.0, nu=0.0, delta=0.0, T=0.5):
    return StagedReceiverConfig(Splitter(T), N, order, delta, DetectorModel(eta, nu))


def test_orders():
    assert validate_order(TYPE_I, 4) == (0, 3, 1, 2)
    assert parse_order("type2") == TYPE_II
    assert parse_order("0,3,1,2") == TYPE_I
    assert parse_order("3120") == (3, 1, 2, 0)
    with pytest.raises(ValueError):
        validate_order((0, 1, 1, 2), 4)
    with pytest.raises(ValueError):
        StagedReceiverConfig(N=0)


def test_homodyne_rows_eq5_first_line():
    rows = homodyne_row_correct_probs(1.0, 4)
    assert rows[0] == pytest.approx((1 + math.erf(math.sqrt(2))) / 2, abs=1e-15)
    assert rows[0] == pytest.approx(0.97725, abs=1e-5)
    # inner rows: interval of half-width A around the mean
    assert rows[1] == pytest.approx(math.erf(math.sqrt(2)), abs=1e-15)
    assert rows[3] == rows[0] and rows[2] == rows[1]


def test_homodyne_rows_gaussian_cdf_oracle():
    from scipy.stats import norm

    A = 0.37
    rows = homodyne_row_correct_probs(A, 4)
    assert rows[0] == pytest.approx(norm.sf(2 * A, loc=3 * A, scale=0.5), abs=1e-15)
    assert rows[1] == pytest.approx(norm.cdf(2 * A, A, 0.5) - norm.cdf(0, A, 0.5), abs=1e-15)


def test_homodyne_rows_limits():
    np.testing.assert_allclose(homodyne_row_correct_probs(0.0, 4), [0.5, 0, 0, 0.5])
    assert homodyne_row_correct_probs(0.0, 4).mean() == 0.25
    assert np.all(homodyne_row_correct_probs(20.0, 4) > 1 - 1e-12)
    with pytest.raises(ValueError):
        homodyne_row_correct_probs(-1.0, 4)


@pytest.mark.parametrize("N", [1, 2, 3, 5, 8])
@pytest.mark.parametrize("order", [TYPE_I, TYPE_II, (2, 0, 3, 1)])
@pytest.mark.parametrize("eta, nu, delta", [(1.0, 0.0, 0.0), (0.7, 0.01, 0.0), (0.9, 0.02, 0.3)])
def test_enumeration_matches_state_machine_oracle(N, order, eta, nu, delta):
    det = DetectorModel(eta, nu)
    A = 0.6
    D = displacement_stage_decision_matrix(cfg_for(N, order, eta, nu, delta), A)
    np.testing.assert_allclose(D, state_machine_oracle(A, N, order, det, delta), atol=1e-14)


def test_enumeration_general_L():
    det = DetectorModel(0.8, 0.01)
    order = (2, 0, 4, 1, 3)
    cfg = StagedReceiverConfig(Splitter(0.5), 5, order, 0.1, det)
    D = displacement_stage_decision_matrix(cfg, 0.5, L=5)
    np.testing.assert_allclose(D, state_machine_oracle(0.5, 5, order, det, 0.1, L=5), atol=1e-14)


@pytest.mark.parametrize("N", range(1, 13))
@pytest.mark.parametrize("A", [0.2, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("eta", [0.7, 1.0])
@pytest.mark.parametrize("nu", [0.0, 0.01])
@pytest.mark.parametrize("order", [TYPE_I, TYPE_II])
def test_closed_form_equals_enumeration(N, A, eta, nu, order):
    cfg = cfg_for(N, order, eta, nu)
    cf = displacement_stage_correct_probs_closed_form(cfg, A)
    en = displacement_stage_correct_probs_enumerated(cfg, A)
    np.testing.assert_allclose(cf, en, atol=1e-12, rtol=0)


def test_closed_form_p00_and_p33():
    N, A, nu = 2, 0.8, 0.01
    cfg = cfg_for(N, TYPE_I, 1.0, nu)
    P = displacement_stage_correct_probs_closed_form(cfg, A)
    p = [math.exp(-nu - (2 * k) ** 2 * A * A / N) for k in range(4)]
    assert P[0] == pytest.approx(p[0] ** N, abs=1e-15)
    # hand expansion at N = 2: p3 (1 - p3) / 3 + (1 - p3) p0
    assert P[3] == pytest.approx(p[3] * (1 - p[3]) / 3 + (1 - p[3]) * p[0], abs=1e-15)
    assert displacement_stage_correct_probs_closed_form(cfg_for(10), 1.0)[0] == 1.0


def test_closed_form_rejects_offsets():
    with pytest.raises(ValueError):
        displacement_stage_correct_probs_closed_form(cfg_for(4, delta=0.1), 1.0)


def test_enumeration_limit():
    with pytest.raises(ValueError):
        displacement_stage_decision_matrix(cfg_for(25), 1.0)


def test_first_probed_never_missed_without_dark_counts():
    for order in (TYPE_I, TYPE_II):
        P = displacement_stage_correct_probs_enumerated(cfg_for(10, order), 0.9)
        assert P[order[0]] == 1.0


def test_zero_amplitude_column_stage():
    for order in (TYPE_I, TYPE_II):
        P = displacement_stage_correct_probs_enumerated(cfg_for(10, order), 0.0)
        expected = np.zeros(4)
        expected[order[0]] = 1.0
        np.testing.assert_array_equal(P, expected)
        assert P.mean() == 0.25


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10), st.floats(0, 3), st.floats(0.5, 1), st.floats(0, 0.05),
       st.floats(-1, 1), st.permutations(range(4)))
def test_decision_matrix_stochastic(N, A, eta, nu, delta, order):
    D = displacement_stage_decision_matrix(cfg_for(N, tuple(order), eta, nu, delta), A)
    assert np.all(D >= -1e-15) and np.all(D <= 1 + 1e-15)
    np.testing.assert_allclose(D.sum(axis=1), 1.0, atol=1e-12)


def test_hybrid_degenerate():
    assert hybrid_error(cfg_for(10), build_constellation(4, 0.0)) == pytest.approx(0.9375, abs=1e-12)


def test_hybrid_composition():
    c = constellation_for_mean_photon(4, 3.0)
    cfg = cfg_for(10, T=0.3)
    rows = homodyne_row_correct_probs(math.sqrt(0.7) * c.alpha, 4)
    cols = displacement_stage_correct_probs_enumerated(cfg, math.sqrt(0.3) * c.alpha)
    assert hybrid_error(cfg, c) == pytest.approx(1 - rows.sum() * cols.sum() / 16, abs=1e-13)


def test_hybrid_pure_and_general_L():
    c = constellation_for_mean_photon(4, 2.0)
    assert hybrid_error(cfg_for(10), c) == hybrid_error(cfg_for(10), c)
    c3 = constellation_for_mean_photon(3, 2.0)
    e3 = hybrid_error(StagedReceiverConfig(order=(0, 2, 1)), c3)
    assert 0 < e3 < 1 - 1 / 9
    with pytest.raises(ValueError):
        hybrid_error(StagedReceiverConfig(order=tuple(range(7))), constellation_for_mean_photon(7, 1.0))


@pytest.mark.parametrize("ns", [0.5, 2.0, 8.0, 15.0])
@pytest.mark.parametrize("order", [TYPE_I, TYPE_II])
def test_efficiency_degradation_monotone(ns, order):
    c = constellation_for_mean_photon(4, ns)
    assert hybrid_error(cfg_for(10, order, eta=1.0), c) <= hybrid_error(cfg_for(10, order, eta=0.7), c)


@pytest.mark.parametrize("ns", [0.5, 2.0, 3.0, 8.0, 15.0])
def test_dark_count_degradation_type1(ns):
    c = constellation_for_mean_photon(4, ns)
    assert hybrid_error(cfg_for(10, TYPE_I, nu=0.0), c) <= hybrid_error(cfg_for(10, TYPE_I, nu=0.01), c)


@pytest.mark.parametrize("ns", [3.0, 8.0, 15.0])
def test_dark_count_degradation_type2(ns):
    c = constellation_for_mean_photon(4, ns)
    assert hybrid_error(cfg_for(10, TYPE_II, nu=0.0), c) <= hybrid_error(cfg_for(10, TYPE_II, nu=0.01), c)


@pytest.mark.parametrize("ns", [0.5, 2.0])
def test_dark_counts_help_type2_weak_signal(ns):
    # weak signals rarely click, so sequential order 0,1,2,3 nearly always keeps
    # column 0; dark clicks push the pointer on and spread the decisions
    c = constellation_for_mean_photon(4, ns)
    assert hybrid_error(cfg_for(10, TYPE_II, nu=0.01), c) < hybrid_error(cfg_for(10, TYPE_II, nu=0.0), c)


@pytest.mark.parametrize("order", [TYPE_I, TYPE_II])
def test_hybrid_above_srm(order):
    for ns in NS_GRID:
        c = constellation_for_mean_photon(4, ns)
        assert hybrid_error(cfg_for(10, order), c) >= helstrom_srm_error(c)


def test_od_identity_and_beta():
    c = constellation_for_mean_photon(4, 2.0)
    od = hybrid_error_od(cfg_for(10), c)
    assert od.p_error == pytest.approx(hybrid_error(cfg_for(10), c), abs=1e-13)
    A = math.sqrt(0.5) * c.alpha
    # first probe of Type I nulls column 0 (p = 3) in the top row (q = 3)
    assert od.beta_sq == pytest.approx(18 * A * A, rel=1e-14)
    assert first_probe_beta_sq(cfg_for(10, delta=0.1), c) == pytest.approx((3 * A + 0.1) ** 2 + 9 * A * A)
