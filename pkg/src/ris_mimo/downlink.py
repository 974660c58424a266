"""Maximum-ratio precoding, downlink reception and effective channel gains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .bs_estimation import (MmseStatistics, PilotBook, bs_statistics, mmse_estimate,
                            project_pilot, receive_uplink_pilots)
from .channel_model import ChannelRealization, LargeScaleRealization, sample_small_scale


@dataclass(frozen=True, eq=False)
class PrecoderSet:
    a: np.ndarray    # (..., K, M)
    eta: np.ndarray  # (K,)


@dataclass(frozen=True, eq=False)
class EffectiveGains:
    alpha: np.ndarray  # (..., K, K); alpha[k, j] couples UE k to stream j


def estimate_power(stats: MmseStatistics) -> float:
    """Closed-form E||u_hat||^2 = ||mu||^2 + tr(A C_yy A^H)."""
    A = stats.gain()
    cov = A @ stats.pilot_covariance @ A.conj().T
    return float(np.vdot(stats.mu, stats.mu).real + np.trace(cov).real)


def estimate_power_mc(ls: LargeScaleRealization, stats: MmseStatistics, k: int,
                      rho_ul: float, tau_p: int, rng: np.random.Generator,
                      n: int = 1000) -> float:
    """Monte-Carlo E||u_hat_k||^2 through the full pilot chain (validation path)."""
    pilots = PilotBook.orthonormal(ls.K, tau_p)
    ch = sample_small_scale(ls, rng, size=n)
    Y = receive_uplink_pilots(ch, pilots, rho_ul, tau_p, rng)
    u_hat = mmse_estimate(project_pilot(Y, pilots.phi[:, k]), stats, rho_ul, tau_p)
    return float(np.mean(np.sum(np.abs(u_hat) ** 2, axis=-1)))


def mr_precoder(u_hat_k: np.ndarray, E_norm2_uhat_k: float) -> np.ndarray:
    if not E_norm2_uhat_k > 0:
        raise ValueError("degenerate scenario: estimate has zero mean power")
    return u_hat_k / np.sqrt(E_norm2_uhat_k)


def equal_power(K: int) -> np.ndarray:
    return np.full(K, 1.0 / K)


def effective_gains(ch: ChannelRealization, precoders: PrecoderSet, rho_d: float) -> EffectiveGains:
    inner = np.einsum("...km,...jm->...kj", ch.u.conj(), precoders.a)
    return EffectiveGains(np.sqrt(rho_d * precoders.eta) * inner)


def qpsk(rng: np.random.Generator, shape) -> np.ndarray:
    """Gray-mapped unit-energy QPSK symbols."""
    bits = rng.integers(0, 2, size=tuple(shape) + (2,))
    return ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) / np.sqrt(2)


def downlink_receive(gains: EffectiveGains, k: int, n_symbols: int,
                     rng: np.random.Generator, noise: bool = True) -> np.ndarray:
    """y_k(n) = sum_j alpha_kj s_j(n) + w_k(n); batched over leading dims of alpha."""
    alpha_k = gains.alpha[..., k, :]                    # (..., K)
    s = qpsk(rng, alpha_k.shape[:-1] + (n_symbols, alpha_k.shape[-1]))
    y = np.einsum("...nj,...j->...n", s, alpha_k)
    if noise:
        y = y + rngmod.crandn(rng, y.shape)
    return y


def transmit_signal(precoders: PrecoderSet, rho_d: float, symbols: np.ndarray) -> np.ndarray:
    """x(n) = sum_k sqrt(rho_d eta_k) a_k s_k(n); symbols (n, K) -> (n, M)."""
    return symbols @ (np.sqrt(rho_d * precoders.eta)[:, None] * precoders.a)


@dataclass(frozen=True, eq=False)
class LinkStatistics:
    """BS-side statistics for one large-scale realization, all UEs."""

    mmse: list[MmseStatistics]
    uhat_power: np.ndarray  # (K,) closed-form E||u_hat_k||^2
    rho_ul: float
    tau_p: int
    rho_d: float


def link_statistics(ls: LargeScaleRealization, rho_ul: float, tau_p: int,
                    rho_d: float) -> LinkStatistics:
    mmse = bs_statistics(ls, rho_ul, tau_p)
    power = np.array([estimate_power(s) for s in mmse])
    return LinkStatistics(mmse, power, rho_ul, tau_p, rho_d)


@dataclass(frozen=True, eq=False)
class IntervalBatch:
    """Everything produced in a batch of coherence intervals."""

    channel: ChannelRealization
    u_hat: np.ndarray         # (S, K, M)
    precoders: PrecoderSet
    gains: EffectiveGains


def simulate_intervals(ls: LargeScaleRealization, link: LinkStatistics,
                       rng: np.random.Generator, size: int) -> IntervalBatch:
    """Fades, pilot training, MMSE, MR precoding and gains for ``size`` intervals."""
    K = ls.K
    pilots = PilotBook.orthonormal(K, link.tau_p)
    ch = sample_small_scale(ls, rng, size=size)
    Y = receive_uplink_pilots(ch, pilots, link.rho_ul, link.tau_p, rng)
    u_hat = np.stack([mmse_estimate(project_pilot(Y, pilots.phi[:, k]), link.mmse[k],
                                    link.rho_ul, link.tau_p) for k in range(K)], axis=-2)
    a = np.stack([mr_precoder(u_hat[..., k, :], link.uhat_power[k]) for k in range(K)], axis=-2)
    pre = PrecoderSet(a=a, eta=equal_power(K))
    return IntervalBatch(ch, u_hat, pre, effective_gains(ch, pre, link.rho_d))


def gain_relative_variance(ls: LargeScaleRealization, link: LinkStatistics,
                           rng: np.random.Generator, n: int, chunk: int = 500) -> np.ndarray:
    """var(alpha_kk) / |E{alpha_kk}|^2 per UE from ``n`` fresh coherence intervals."""
    diags = []
    done = 0
    while done < n:
        m = min(chunk, n - done)
        alpha = simulate_intervals(ls, link, rng, m).gains.alpha
        diags.append(np.diagonal(alpha, axis1=-2, axis2=-1))
        done += m
    d = np.concatenate(diags)
    return np.var(d, axis=0) / np.abs(d.mean(0)) ** 2
