import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ris_mimo import rng as rngmod
from ris_mimo.bs_estimation import compute_scaled_covariance
from ris_mimo.channel_model import ChannelRealization, sample_large_scale, sample_small_scale
from ris_mimo.downlink import (EffectiveGains, PrecoderSet, downlink_receive, effective_gains,
                               equal_power, estimate_power, estimate_power_mc,
                               gain_relative_variance, link_statistics, mr_precoder, qpsk,
                               simulate_intervals, transmit_signal)

from conftest import make_large_scale, make_scenario
from oracles import RHO_UL, balanced_large_scale


def _gains_by_loop(u, a, eta, rho_d):
    K = u.shape[0]
    out = np.zeros((K, K), complex)
    for k in range(K):
        for j in range(K):
            out[k, j] = np.sqrt(rho_d * eta[j]) * sum(np.conj(u[k, m]) * a[j, m]
                                                       for m in range(u.shape[1]))
    return out


def test_mr_precoder_divides_by_rms():
    u = np.zeros(8, complex)
    u[0] = 2.0
    a = mr_precoder(u, 4.0)
    assert np.allclose(a, np.eye(8)[0])


@pytest.mark.parametrize("bad", [0.0, -1.0, np.nan])
def test_mr_precoder_rejects_degenerate_power(bad):
    with pytest.raises(ValueError):
        mr_precoder(np.ones(4), bad)


def test_pure_los_precoder_has_unit_norm():
    sc, ls = make_large_scale(link_mode="pure_los")
    link = link_statistics(ls, sc.rho_ul, sc.tau_p, sc.rho_d)
    b = simulate_intervals(ls, link, rngmod.stream(1, 1), 3)
    assert np.allclose(np.linalg.norm(b.precoders.a, axis=-1), 1.0)


def test_precoder_mean_square_is_one():
    _, ls = balanced_large_scale()
    link = link_statistics(ls, RHO_UL, ls.K, 1.0)
    rng = rngmod.stream(2, 2)
    p = np.concatenate([np.sum(np.abs(simulate_intervals(ls, link, rng, 10_000).precoders.a) ** 2, -1)
                        for _ in range(10)])
    assert np.all(np.abs(p.mean(0) - 1.0) <= 0.02)


def test_closed_form_estimate_power_matches_monte_carlo():
    _, ls = balanced_large_scale()
    for k in range(ls.K):
        s = compute_scaled_covariance(ls, k, RHO_UL, ls.K)
        mc = estimate_power_mc(ls, s, k, RHO_UL, ls.K, rngmod.stream(3, k), n=20_000)
        assert estimate_power(s) == pytest.approx(mc, rel=0.02)


def test_single_user_perfect_csi_gain():
    u = np.array([[3.0, 4.0j, 0.0]])
    a = u / np.linalg.norm(u)
    ch = ChannelRealization(g=u, H=np.zeros((0, 3, 1)), z=np.zeros((0, 1, 1)), u=u)
    g = effective_gains(ch, PrecoderSet(a, np.array([0.5])), 8.0)
    assert g.alpha[0, 0] == pytest.approx(np.sqrt(8.0 * 0.5) * 5.0)


def test_orthogonal_precoder_gives_zero_cross_gain():
    u = np.array([[1.0, 0.0], [0.0, 1.0]], complex)
    ch = ChannelRealization(g=u, H=np.zeros((0, 2, 1)), z=np.zeros((0, 2, 1)), u=u)
    g = effective_gains(ch, PrecoderSet(u.copy(), equal_power(2)), 1.0)
    assert g.alpha[0, 1] == 0 and g.alpha[1, 0] == 0


@given(st.integers(0, 10_000))
def test_effective_gains_match_loop_evaluation(seed):
    rng = rngmod.stream(seed, 0)
    u = rngmod.crandn(rng, (3, 5))
    a = rngmod.crandn(rng, (3, 5))
    eta = rng.uniform(0.1, 1.0, 3)
    ch = ChannelRealization(g=u, H=np.zeros((0, 5, 1)), z=np.zeros((0, 3, 1)), u=u)
    got = effective_gains(ch, PrecoderSet(a, eta), 2.5).alpha
    assert np.allclose(got, _gains_by_loop(u, a, eta, 2.5), atol=1e-12)


def test_qpsk_is_unit_modulus_and_balanced():
    s = qpsk(rngmod.stream(0, 1), (100_000,))
    assert np.allclose(np.abs(s), 1.0)
    assert set(np.round(s * np.sqrt(2)).tolist()) == {1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j}
    assert abs(s.mean()) < 3 / np.sqrt(len(s))


def test_zero_gains_receive_pure_noise():
    y = downlink_receive(EffectiveGains(np.zeros((3, 3), complex)), 1, 100_000, rngmod.stream(0, 2))
    assert np.mean(np.abs(y) ** 2) == pytest.approx(1.0, abs=3 * 1 / np.sqrt(len(y)))


def test_noiseless_single_user_has_constant_modulus():
    alpha = np.array([[0.3 - 1.2j]])
    y = downlink_receive(EffectiveGains(alpha), 0, 490, rngmod.stream(0, 3), noise=False)
    assert np.allclose(np.abs(y), abs(alpha[0, 0]))


def test_receive_is_deterministic_per_stream():
    alpha = rngmod.crandn(rngmod.stream(1, 0), (4, 4))
    y1 = downlink_receive(EffectiveGains(alpha), 2, 50, rngmod.stream(9, 9))
    y2 = downlink_receive(EffectiveGains(alpha), 2, 50, rngmod.stream(9, 9))
    assert np.array_equal(y1, y2)


def test_transmit_power_within_budget():
    _, ls = balanced_large_scale()
    rho_d = 7.0
    link = link_statistics(ls, RHO_UL, ls.K, rho_d)
    rng = rngmod.stream(4, 4)
    b = simulate_intervals(ls, link, rng, 20_000)
    s = qpsk(rng, (20_000, ls.K))
    x = np.einsum("bk,bkm->bm", np.sqrt(rho_d * b.precoders.eta) * s, b.precoders.a)
    p = np.sum(np.abs(x) ** 2, -1)
    assert p.mean() <= rho_d + 3 * p.std() / np.sqrt(len(p))
    # the single-interval helper agrees with the batched synthesis
    x0 = transmit_signal(PrecoderSet(b.precoders.a[0], b.precoders.eta), rho_d, s[:1])
    assert np.allclose(x0[0], x[0])


def _avg_relative_variance(M, n_large, n_small, rebalance=None, strip_ris=False):
    vals = []
    for i in range(n_large):
        sc = make_scenario(M=M, N=16, K=2, link_mode="all_nlos", seed=i)
        ls = sample_large_scale(sc, rngmod.stream(31, i, rngmod.LARGE_SCALE))
        if rebalance:
            ls = rebalance(ls)
        if strip_ris:
            ls = ls.without_ris()
        rho_ul = RHO_UL if rebalance else sc.rho_ul
        link = link_statistics(ls, rho_ul, sc.tau_p, 1.0)
        vals.append(gain_relative_variance(ls, link, rngmod.stream(31, i, rngmod.SMALL_SCALE), n_small))
    return float(np.mean(vals))


def test_hardening_strengthens_with_array_size():
    r = [_avg_relative_variance(M, 20, 400) for M in (8, 32, 128)]
    assert r[0] > r[1] > r[2]


def test_ris_links_add_gain_fluctuation():
    def strong_ris(ls):
        return dataclasses.replace(ls, beta0=np.ones(ls.K), beta1=np.ones(ls.L),
                                   beta2=np.full((ls.L, ls.K), 0.3))
    with_ris = _avg_relative_variance(16, 20, 400, rebalance=strong_ris)
    no_ris = _avg_relative_variance(16, 20, 400, rebalance=strong_ris, strip_ris=True)
    assert with_ris > no_ris


def test_simulate_intervals_shapes_and_determinism():
    sc, ls = make_large_scale()
    link = link_statistics(ls, sc.rho_ul, sc.tau_p, sc.rho_d)
    b1 = simulate_intervals(ls, link, rngmod.stream(5, 5), 7)
    b2 = simulate_intervals(ls, link, rngmod.stream(5, 5), 7)
    assert b1.gains.alpha.shape == (7, ls.K, ls.K)
    assert b1.u_hat.shape == (7, ls.K, ls.M)
    assert np.array_equal(b1.gains.alpha, b2.gains.alpha)
    assert np.all(np.isfinite(b1.gains.alpha))
