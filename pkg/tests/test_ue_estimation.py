import numpy as np
import pytest
from hypothesis import given, strategies as st

from ris_mimo import rng as rngmod
from ris_mimo.channel_model import Scenario, sample_large_scale
from ris_mimo.downlink import (EffectiveGains, downlink_receive, link_statistics,
                               simulate_intervals)
from ris_mimo.ue_estimation import (FEATURE_SETS, NMSE_FLOOR_DB, FeatureRecord, UeStatistics,
                                    blind_estimate, build_feature_record,
                                    hardening_bound_estimate, interference_noise_power,
                                    model_based_estimate, nmse, sample_mean_power, ue_statistics)

from conftest import make_large_scale, make_scenario
from oracles import brute_force_interference

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_sample_mean_power_examples():
    assert sample_mean_power(np.array([1, 1j, -1, -1j])) == 1.0
    assert sample_mean_power(np.zeros(7, complex)) == 0.0
    y = downlink_receive(EffectiveGains(np.array([[3.0 + 0j]])), 0, 490, rngmod.stream(0, 0),
                         noise=False)
    assert sample_mean_power(y) == pytest.approx(9.0, rel=1e-14)
    with pytest.raises(ValueError):
        sample_mean_power(np.zeros(0))


def test_sample_mean_power_reduces_last_axis():
    y = np.ones((2, 3, 5))
    assert sample_mean_power(y).shape == (2, 3)


def test_single_user_has_noise_only_delta():
    sc, ls = make_large_scale(K=1)
    link = link_statistics(ls, sc.rho_ul, sc.tau_p, sc.rho_d)
    s = ue_statistics(ls, link, 0, 50, rngmod.stream(1, 1))
    assert s.delta_k == 1.0


def test_zero_downlink_power_has_noise_only_delta():
    sc, ls = make_large_scale()
    link = link_statistics(ls, sc.rho_ul, sc.tau_p, 0.0)
    for k in range(ls.K):
        assert interference_noise_power(ls, link, k, 40, rngmod.stream(1, k)) == 1.0


def test_delta_matches_brute_force_average():
    sc = Scenario(seed=5)  # default K = 10, M = 40, N = 25
    ls = sample_large_scale(sc, rngmod.stream(5, 0, rngmod.LARGE_SCALE))
    link = link_statistics(ls, sc.rho_ul, sc.tau_p, sc.rho_d)
    k = 3
    lib = ue_statistics(ls, link, k, 10_000, rngmod.stream(5, 1)).delta_k
    ref = brute_force_interference(ls, sc.rho_ul, sc.tau_p, sc.rho_d, k, 10_000, seed=6)
    se_lib = ref.std() / np.sqrt(10_000)
    # two independent sample means: the difference has sqrt(2) times one SE
    assert abs(lib - (ref.mean() + 1.0)) <= 3 * np.sqrt(2) * se_lib


def test_statistics_invariants():
    sc, ls = make_large_scale()
    link = link_statistics(ls, sc.rho_ul, sc.tau_p, sc.rho_d)
    s = ue_statistics(ls, link, 1, 100, rngmod.stream(2, 2))
    assert s.delta_k >= 1.0 and s.power_feature >= 0 and s.mc_samples == 100
    with pytest.raises(ValueError):
        ue_statistics(ls, link, 1, 0, rngmod.stream(2, 2))


def test_hardening_bound_is_pass_through():
    s = UeStatistics(1.5 - 0.2j, 3.0, 7.0, 10)
    assert hardening_bound_estimate(s) == 1.5 - 0.2j


def test_hardening_bound_is_exact_for_deterministic_channels():
    sc, ls = make_large_scale(link_mode="pure_los")
    link = link_statistics(ls, sc.rho_ul, sc.tau_p, sc.rho_d)
    s = ue_statistics(ls, link, 0, 20, rngmod.stream(3, 3))
    alpha = simulate_intervals(ls, link, rngmod.stream(3, 4), 5).gains.alpha[:, 0, 0]
    assert nmse(np.full(5, hardening_bound_estimate(s)), alpha) < -200


def test_hardening_bound_improves_with_array_size():
    def hb_nmse(M):
        est, tru = [], []
        for i in range(10):
            sc = make_scenario(M=M, N=25, K=4, link_mode="all_nlos", seed=i)
            ls = sample_large_scale(sc, rngmod.stream(40, i, rngmod.LARGE_SCALE))
            link = link_statistics(ls, sc.rho_ul, sc.tau_p, sc.rho_d)
            s = ue_statistics(ls, link, 0, 300, rngmod.stream(40, i, rngmod.STATISTICS))
            a = simulate_intervals(ls, link, rngmod.stream(40, i, rngmod.SMALL_SCALE), 100).gains.alpha
            est.append(np.full(100, hardening_bound_estimate(s)))
            tru.append(a[:, 0, 0])
        return nmse(np.concatenate(est), np.concatenate(tru))
    assert hb_nmse(100) < hb_nmse(20)


def test_model_based_branches():
    s = UeStatistics(0.7 + 0.1j, 3.0, 1.0, 10)
    assert model_based_estimate(7.0, s) == pytest.approx(2.0)
    assert model_based_estimate(3.0, s) == 0.7 + 0.1j
    assert model_based_estimate(0.5, s) == 0.7 + 0.1j
    got = model_based_estimate(np.array([7.0, 1.0]), s)
    assert np.allclose(got, [2.0, 0.7 + 0.1j])


@given(finite, finite, finite, finite)
def test_blind_estimate_is_total(xi, delta, re, im):
    est = blind_estimate(xi, delta, complex(re, im))
    assert np.isfinite(est)
    if xi > delta:
        assert est.imag == 0 and est.real >= 0
    else:
        assert est == complex(re, im)


def test_model_based_concentrates_for_single_user():
    rng = rngmod.stream(7, 7)
    s = UeStatistics(2.0 + 0j, 1.0, 4.0, 1)
    gains = EffectiveGains(np.full((1000, 1, 1), 2.0 + 0j))
    y = downlink_receive(gains, 0, 490, rng)
    est = model_based_estimate(sample_mean_power(y), s)
    assert np.mean(np.abs(est - 2.0) <= 0.2) >= 0.95


def test_feature_record_order_and_ablations():
    s = UeStatistics(-0.6 + 0.8j, 2.0, 5.0, 10)
    rec = build_feature_record(3.0, s, 1 + 1j)
    assert np.array_equal(rec.features(), [3.0, 2.0, 5.0, 1.0])
    assert np.array_equal(rec.features("baseline_A"), [3.0, 2.0, 5.0])
    assert np.array_equal(rec.features("baseline_B"), [3.0, 2.0, 1.0])
    assert rec.label_alpha == 1 + 1j
    assert set(FEATURE_SETS) == {"full", "baseline_A", "baseline_B"}
    assert isinstance(rec, FeatureRecord)


@pytest.mark.parametrize("xi,label", [(np.nan, 1.0), (np.inf, 1.0), (1.0, complex(np.nan, 0))])
def test_feature_record_rejects_non_finite(xi, label):
    with pytest.raises(ValueError):
        build_feature_record(xi, UeStatistics(1.0, 1.0, 1.0, 1), label)


def test_nmse_examples():
    a = np.array([1 + 1j, -2.0, 0.5j])
    assert nmse(a, a) == NMSE_FLOOR_DB
    assert nmse(np.zeros(3), a) == pytest.approx(0.0)
    assert nmse(a * 1.1, a) == pytest.approx(20 * np.log10(0.1))
    with pytest.raises(ValueError):
        nmse(np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        nmse(np.zeros(2), np.ones(3))


@given(st.floats(0, 2 * np.pi), st.integers(0, 1000))
def test_nmse_is_phase_invariant(phase, seed):
    rng = rngmod.stream(seed, 1)
    t = rngmod.crandn(rng, 20)
    e = t + 0.3 * rngmod.crandn(rng, 20)
    rot = np.exp(1j * phase)
    assert nmse(e * rot, t * rot) == pytest.approx(nmse(e, t), abs=1e-9)
