"""Uplink pilot training and linear MMSE estimation of aggregated channels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .channel_model import ChannelRealization, LargeScaleRealization


class IllConditionedError(ArithmeticError):
    """The MMSE linear solve did not reproduce its right-hand side."""


@dataclass(frozen=True, eq=False)
class PilotBook:
    phi: np.ndarray  # (tau_p, K), column k is UE k's unit-norm pilot

    def __post_init__(self):
        gram = self.phi.conj().T @ self.phi
        if not np.allclose(gram, np.eye(gram.shape[0]), atol=1e-12):
            raise ValueError("pilot sequences must be mutually orthonormal")

    @property
    def tau_p(self) -> int:
        return self.phi.shape[0]

    @property
    def K(self) -> int:
        return self.phi.shape[1]

    @classmethod
    def orthonormal(cls, K: int, tau_p: int | None = None) -> "PilotBook":
        """First K columns of the unitary DFT matrix of size tau_p."""
        tau_p = K if tau_p is None else tau_p
        if tau_p < K:
            raise ValueError(f"tau_p={tau_p} cannot hold {K} orthogonal pilots")
        t = np.arange(tau_p)
        F = np.exp(-2j * np.pi * np.outer(t, t) / tau_p) / np.sqrt(tau_p)
        return cls(F[:, :K])


@dataclass(frozen=True, eq=False)
class MmseStatistics:
    """First and second order statistics of one aggregated channel u_k.

    ``C`` is the covariance scaled by sqrt(rho tau_p), which is also the
    cross-covariance between u_k and the projected pilot y_pk.
    """

    mu: np.ndarray
    C: np.ndarray
    R: np.ndarray
    E_norm2_uk: float
    scale: float  # sqrt(rho_ul * tau_p)

    @property
    def pilot_covariance(self) -> np.ndarray:
        """Covariance of y_pk: scale * C + I."""
        return self.scale * self.C + np.eye(len(self.mu))

    def gain(self) -> np.ndarray:
        """A = C (scale C + I)^{-1}, the matrix applied to the innovation."""
        # C and (scale C + I) commute, so A = (scale C + I)^{-1} C
        return np.linalg.solve(self.pilot_covariance, self.C)


def receive_uplink_pilots(ch: ChannelRealization, pilots: PilotBook, rho_ul: float,
                          tau_p: int, rng: np.random.Generator | None,
                          noise: bool = True) -> np.ndarray:
    """Y_p = sum_k sqrt(rho tau_p) u_k phi_k^H + W_p, shape (..., M, tau_p).

    ``noise=False`` drops W_p (test hook); ``rng`` may then be None.
    """
    u = ch.u
    if pilots.K != u.shape[-2] or pilots.tau_p != tau_p:
        raise ValueError(
            f"pilot book is {pilots.tau_p}x{pilots.K}, channel has K={u.shape[-2]}, tau_p={tau_p}")
    Y = np.sqrt(rho_ul * tau_p) * np.einsum("...km,tk->...mt", u, pilots.phi.conj())
    if noise:
        Y = Y + rngmod.crandn(rng, Y.shape)
    return Y


def project_pilot(Y_p: np.ndarray, phi_k: np.ndarray) -> np.ndarray:
    if Y_p.shape[-1] != phi_k.shape[0]:
        raise ValueError("pilot length mismatch")
    return Y_p @ phi_k


def compute_prior_mean(ls: LargeScaleRealization, k: int) -> np.ndarray:
    mu = np.sqrt(ls.beta0_los[k]) * ls.g_bar[k]
    b1l, b2l = ls.beta1_los, ls.beta2_los
    for ell in range(ls.L):
        cascade = ls.H_bar[ell] @ (ls.phases[ell] * ls.z_bar[ell, k])
        mu = mu + np.sqrt(b1l[ell] * b2l[ell, k]) * cascade
    return mu


def compute_scaled_covariance(ls: LargeScaleRealization, k: int, rho_ul: float,
                              tau_p: int) -> MmseStatistics:
    M = ls.M
    scale = np.sqrt(rho_ul * tau_p)
    b1l, b1n = ls.beta1_los, ls.beta1_nlos
    b2l, b2n = ls.beta2_los, ls.beta2_nlos

    R = ls.beta0_nlos[k] * np.eye(M, dtype=complex)
    for ell in range(ls.L):
        nu = ls.phases[ell]
        # H_bar Phi Phi^H H_bar^H without forming the diagonal matrix
        HP = ls.H_bar[ell] * nu
        R = R + b1l[ell] * b2n[ell, k] * (HP @ HP.conj().T)
        diag_term = (b2l[ell, k] * np.sum(np.abs(nu * ls.z_bar[ell, k]) ** 2)
                     + b2n[ell, k] * np.sum(np.abs(nu) ** 2))
        R = R + b1n[ell] * diag_term * np.eye(M)
    R = 0.5 * (R + R.conj().T)
    mu = compute_prior_mean(ls, k)
    return MmseStatistics(mu=mu, C=scale * R, R=R,
                          E_norm2_uk=float(np.vdot(mu, mu).real + np.trace(R).real),
                          scale=float(scale))


def bs_statistics(ls: LargeScaleRealization, rho_ul: float, tau_p: int) -> list[MmseStatistics]:
    return [compute_scaled_covariance(ls, k, rho_ul, tau_p) for k in range(ls.K)]


def mmse_estimate(y_pk: np.ndarray, stats: MmseStatistics, rho_ul: float, tau_p: int,
                  rtol: float = 1e-8) -> np.ndarray:
    """u_hat = mu + C (scale C + I)^{-1} (y_pk - scale mu), batched over leading dims."""
    scale = np.sqrt(rho_ul * tau_p)
    innovation = y_pk - scale * stats.mu               # (..., M)
    A = stats.pilot_covariance
    rhs = innovation.reshape(-1, innovation.shape[-1]).T
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedError(str(exc)) from exc
    resid = np.linalg.norm(A @ sol - rhs)
    if not resid <= rtol * max(np.linalg.norm(rhs), 1.0):
        raise IllConditionedError(f"MMSE solve residual {resid:.3e}")
    return stats.mu + (stats.C @ sol).T.reshape(innovation.shape)
