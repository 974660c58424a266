"""Scenario geometry, large-scale fading and Rician small-scale channels.

Array shapes used throughout (``...`` is an optional batch of draws)::

    g      (..., K, M)      direct BS-UE channels
    H      (..., L, M, N)   BS-RIS channels
    z      (..., L, K, N)   RIS-UE channels
    u      (..., K, M)      aggregated channels g_k + sum_l H_l Phi_l z_lk
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng as rngmod

LINK_MODES = ("probabilistic", "los_dominated", "nlos_dominated", "all_nlos", "pure_los")


def db2lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def snr_from_power(power_w: float, noise_power_dbm: float) -> float:
    """Transmit power over noise power, both converted to watts."""
    return power_w / (10.0 ** (noise_power_dbm / 10.0) * 1e-3)


@dataclass(frozen=True)
class PathLossConfig:
    """Log-distance path loss, LoS probability and K-factor models.

    All gains are in dB as functions of the 3-D link distance in meters.
    Subclass and override the four model methods for other families.
    """

    los_intercept_db: float = -30.18
    los_slope: float = 26.0
    nlos_intercept_db: float = -34.53
    nlos_slope: float = 38.0
    los_prob_d1: float = 18.0
    los_prob_d2: float = 36.0
    k_intercept_db: float = 13.0
    k_slope_db: float = 0.03
    noise_power_dbm: float = -92.0

    def __post_init__(self):
        if self.los_slope < 0 or self.nlos_slope < 0:
            raise ValueError("path-loss slopes must be non-negative")
        if self.los_prob_d1 <= 0 or self.los_prob_d2 <= 0:
            raise ValueError("LoS probability distances must be positive")

    def los_pathloss(self, d):
        return self.los_intercept_db - self.los_slope * np.log10(d)

    def nlos_pathloss(self, d):
        return self.nlos_intercept_db - self.nlos_slope * np.log10(d)

    def los_probability(self, d):
        d = np.asarray(d, dtype=float)
        decay = np.exp(-d / self.los_prob_d2)
        return np.minimum(self.los_prob_d1 / d, 1.0) * (1.0 - decay) + decay

    def rician_k(self, d):
        """Linear K-factor of a LoS link."""
        return db2lin(self.k_intercept_db - self.k_slope_db * np.asarray(d, dtype=float))


@dataclass(frozen=True, eq=False)
class PhaseShiftConfig:
    """Practical RIS reflection model: amplitude depends on the applied phase.

    ``theta`` holds one phase per (RIS, element) in [-pi, pi); ``None``
    until a scenario fills it from its seed.
    """

    a_min: float = 0.2
    b: float = 1.6
    phi: float = 0.43 * np.pi
    theta: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0.0 <= self.a_min <= 1.0:
            raise ValueError(f"a_min must lie in [0, 1], got {self.a_min}")
        if self.b < 0 or self.phi < 0:
            raise ValueError("b and phi must be non-negative")


def phase_amplitude(theta, cfg: PhaseShiftConfig):
    """Reflection amplitude a(theta), bounded to [a_min, 1]."""
    s = (np.sin(np.asarray(theta, dtype=float) - cfg.phi) + 1.0) / 2.0
    # sin can exceed 1 by an ulp
    s = np.clip(s, 0.0, 1.0)
    return (1.0 - cfg.a_min) * s**cfg.b + cfg.a_min


def phase_coefficients(cfg: PhaseShiftConfig) -> np.ndarray:
    """Complex reflection coefficients nu = a(theta) e^{j theta}, shape (L, N)."""
    if cfg.theta is None:
        raise ValueError("phase configuration has no per-element phases")
    theta = np.asarray(cfg.theta, dtype=float)
    return phase_amplitude(theta, cfg) * np.exp(1j * theta)


def build_phase_matrix(cfg: PhaseShiftConfig, ell: int) -> np.ndarray:
    return np.diag(phase_coefficients(cfg)[ell])


def steering_ula(M: int, theta: float, spacing_ratio: float = 0.5) -> np.ndarray:
    m = np.arange(M)
    return np.exp(2j * np.pi * m * spacing_ratio * np.sin(theta))


def steering_upa(N: int, theta: float, psi: float, spacing_ratio: float = 0.25,
                 row_length: Optional[int] = None) -> np.ndarray:
    """Planar-array response with 0-based element index n.

    ``row_length`` defaults to min(N, 5) elements per row, applied even
    when N is not a multiple of it.
    """
    nx = min(N, 5) if row_length is None else row_length
    n = np.arange(N)
    row = n // nx
    col = n - row * nx
    phase = row * np.sin(psi) * np.sin(theta) + col * np.sin(psi) * np.cos(theta)
    return np.exp(2j * np.pi * spacing_ratio * phase)


@dataclass(frozen=True, eq=False)
class Scenario:
    M: int = 40
    N: int = 25
    L: int = 2
    K: int = 10
    bs_position: tuple = (0.0, 0.0)
    ris_positions: tuple = ((10.0, 30.0), (10.0, -30.0))
    ue_area: tuple = ((150.0, -50.0), (250.0, 50.0))
    altitude_gap: float = 10.0
    d_B_over_lambda: float = 0.5
    d_R_over_lambda: float = 0.25
    rho_ul: float = snr_from_power(0.1, -92.0)
    rho_d: float = snr_from_power(10.0, -92.0)
    tau_c: int = 500
    tau_p: Optional[int] = None
    phase_cfg: PhaseShiftConfig = field(default_factory=PhaseShiftConfig)
    pathloss_cfg: PathLossConfig = field(default_factory=PathLossConfig)
    seed: int = 0
    link_mode: str = "probabilistic"
    ris_row_length: Optional[int] = None

    def __post_init__(self):
        if self.M < 1 or self.N < 1 or self.K < 1 or self.L < 0:
            raise ValueError("need M, N, K >= 1 and L >= 0")
        if len(self.ris_positions) != self.L:
            raise ValueError(f"{len(self.ris_positions)} RIS positions given for L={self.L}")
        if self.tau_p is None:
            object.__setattr__(self, "tau_p", self.K)
        if not self.K <= self.tau_p <= self.tau_c:
            raise ValueError(f"need K <= tau_p <= tau_c, got {self.K}, {self.tau_p}, {self.tau_c}")
        if self.rho_ul <= 0 or self.rho_d < 0:
            raise ValueError("SNRs must be positive")
        if self.link_mode not in LINK_MODES:
            raise ValueError(f"unknown link_mode {self.link_mode!r}")
        if self.phase_cfg.theta is None:
            theta = rngmod.stream(self.seed, rngmod.PHASES).uniform(-np.pi, np.pi, (self.L, self.N))
            object.__setattr__(self, "phase_cfg", dataclasses.replace(self.phase_cfg, theta=theta))
        elif np.shape(self.phase_cfg.theta) != (self.L, self.N):
            raise ValueError("phase_cfg.theta must have shape (L, N)")

    def replace(self, **changes) -> "Scenario":
        # resizing invalidates the drawn phases
        if {"L", "N"} & changes.keys() and "phase_cfg" not in changes:
            changes["phase_cfg"] = dataclasses.replace(self.phase_cfg, theta=None)
        if "K" in changes and "tau_p" not in changes:
            changes["tau_p"] = None
        if "L" in changes and "ris_positions" not in changes:
            base = list(self.ris_positions) or [(10.0, 30.0), (10.0, -30.0)]
            changes["ris_positions"] = tuple(base[i % len(base)] for i in range(changes["L"]))
        return dataclasses.replace(self, **changes)


def rician_split(beta, kfactor):
    """(beta_los, beta_nlos) with K = inf meaning a purely deterministic link."""
    beta = np.asarray(beta, dtype=float)
    kfactor = np.asarray(kfactor, dtype=float)
    inf = np.isinf(kfactor)
    k = np.where(inf, 0.0, kfactor)
    los = np.where(inf, beta, beta * k / (k + 1.0))
    nlos = np.where(inf, 0.0, beta / (k + 1.0))
    return los, nlos


@dataclass(frozen=True, eq=False)
class LargeScaleRealization:
    beta0: np.ndarray        # (K,)
    beta1: np.ndarray        # (L,)
    beta2: np.ndarray        # (L, K)
    kf0: np.ndarray
    kf1: np.ndarray
    kf2: np.ndarray
    los0: np.ndarray
    los1: np.ndarray
    los2: np.ndarray
    g_bar: np.ndarray        # (K, M)
    H_bar: np.ndarray        # (L, M, N)
    z_bar: np.ndarray        # (L, K, N)
    phases: np.ndarray       # (L, N) diagonal of Phi_l
    ue_positions: np.ndarray  # (K, 2)

    @property
    def M(self) -> int:
        return self.g_bar.shape[1]

    @property
    def K(self) -> int:
        return self.g_bar.shape[0]

    @property
    def L(self) -> int:
        return self.H_bar.shape[0]

    @property
    def N(self) -> int:
        return self.H_bar.shape[2]

    @property
    def beta0_los(self):
        return rician_split(self.beta0, self.kf0)[0]

    @property
    def beta0_nlos(self):
        return rician_split(self.beta0, self.kf0)[1]

    @property
    def beta1_los(self):
        return rician_split(self.beta1, self.kf1)[0]

    @property
    def beta1_nlos(self):
        return rician_split(self.beta1, self.kf1)[1]

    @property
    def beta2_los(self):
        return rician_split(self.beta2, self.kf2)[0]

    @property
    def beta2_nlos(self):
        return rician_split(self.beta2, self.kf2)[1]

    def phase_matrix(self, ell: int) -> np.ndarray:
        return np.diag(self.phases[ell])

    def without_ris(self) -> "LargeScaleRealization":
        """Same direct links with every RIS removed."""
        L0 = (0,)
        return dataclasses.replace(
            self,
            beta1=np.zeros(L0), beta2=np.zeros(L0 + (self.K,)),
            kf1=np.zeros(L0), kf2=np.zeros(L0 + (self.K,)),
            los1=np.zeros(L0, bool), los2=np.zeros(L0 + (self.K,), bool),
            H_bar=np.zeros(L0 + (self.M, self.N), complex),
            z_bar=np.zeros(L0 + (self.K, self.N), complex),
            phases=np.zeros(L0 + (self.N,), complex),
        )


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    g: np.ndarray
    H: np.ndarray
    z: np.ndarray
    u: np.ndarray


def _link_flags(scenario: Scenario, d_ue, rng):
    """LoS flags for UE links (by distance) and K-factors for every link."""
    mode = scenario.link_mode
    pl = scenario.pathloss_cfg
    if mode == "probabilistic":
        return rng.uniform(size=np.shape(d_ue)) < pl.los_probability(d_ue)
    if mode in ("los_dominated", "pure_los"):
        return np.ones(np.shape(d_ue), bool)
    return np.zeros(np.shape(d_ue), bool)


def _gains(scenario: Scenario, d, los):
    pl = scenario.pathloss_cfg
    beta = np.where(los, db2lin(pl.los_pathloss(d)), db2lin(pl.nlos_pathloss(d)))
    if scenario.link_mode == "pure_los":
        kf = np.where(los, np.inf, 0.0)
    else:
        kf = np.where(los, pl.rician_k(d), 0.0)
    return beta, kf


def sample_large_scale(scenario: Scenario, rng: np.random.Generator) -> LargeScaleRealization:
    """Draw UE drops and every per-link quantity that is fixed across fades.

    The BS ULA lies on the y-axis, so the BS-side angle is the azimuth
    measured from the x-axis.  RIS-side angles use the azimuth of the
    horizontal projection and psi = -atan2(horizontal, vertical offset).
    """
    sc = scenario
    (x0, y0), (x1, y1) = sc.ue_area
    ue = np.column_stack([rng.uniform(x0, x1, sc.K), rng.uniform(y0, y1, sc.K)])
    bs = np.asarray(sc.bs_position, dtype=float)
    ris = np.asarray(sc.ris_positions, dtype=float).reshape(sc.L, 2)
    h = sc.altitude_gap

    v_bu = ue - bs                                   # (K, 2)
    v_br = ris - bs                                  # (L, 2)
    v_ru = ue[None, :, :] - ris[:, None, :]          # (L, K, 2)
    d0 = np.hypot(np.hypot(v_bu[:, 0], v_bu[:, 1]), h)
    d1 = np.hypot(v_br[:, 0], v_br[:, 1])
    d2 = np.hypot(np.hypot(v_ru[..., 0], v_ru[..., 1]), h)
    if np.any(d0 <= 0) or np.any(d1 <= 0) or np.any(d2 <= 0):
        raise ValueError("degenerate geometry: zero link distance")

    los0 = _link_flags(sc, d0, rng)
    los2 = _link_flags(sc, d2, rng)
    # RIS sites are chosen to see the BS; only all_nlos removes that path
    los1 = np.full(sc.L, sc.link_mode != "all_nlos")

    beta0, kf0 = _gains(sc, d0, los0)
    beta1, kf1 = _gains(sc, d1, los1)
    beta2, kf2 = _gains(sc, d2, los2)

    az_bu = np.arctan2(v_bu[:, 1], v_bu[:, 0])
    az_br = np.arctan2(v_br[:, 1], v_br[:, 0])
    # arrival at the RIS comes from the BS: reverse direction
    az_rb = np.mod(np.arctan2(-v_br[:, 1], -v_br[:, 0]), 2 * np.pi)
    psi_rb = -np.arctan2(d1, 0.0)
    az_ru = np.mod(np.arctan2(v_ru[..., 1], v_ru[..., 0]), 2 * np.pi)
    psi_ru = -np.arctan2(np.hypot(v_ru[..., 0], v_ru[..., 1]), h)

    sB, sR, nx = sc.d_B_over_lambda, sc.d_R_over_lambda, sc.ris_row_length
    g_bar = np.stack([steering_ula(sc.M, a, sB) for a in az_bu])
    H_bar = np.zeros((sc.L, sc.M, sc.N), complex)
    z_bar = np.zeros((sc.L, sc.K, sc.N), complex)
    for ell in range(sc.L):
        a_b = steering_ula(sc.M, az_br[ell], sB)
        a_r = steering_upa(sc.N, az_rb[ell], psi_rb[ell], sR, nx)
        H_bar[ell] = np.outer(a_b, a_r.conj())
        for k in range(sc.K):
            z_bar[ell, k] = steering_upa(sc.N, az_ru[ell, k], psi_ru[ell, k], sR, nx)

    return LargeScaleRealization(
        beta0=beta0, beta1=beta1, beta2=beta2,
        kf0=kf0, kf1=kf1, kf2=kf2,
        los0=los0, los1=los1, los2=los2,
        g_bar=g_bar, H_bar=H_bar, z_bar=z_bar,
        phases=phase_coefficients(sc.phase_cfg), ue_positions=ue,
    )


def aggregate(g, H, phases, z):
    """u_k = g_k + sum_l H_l Phi_l z_lk for arbitrary leading batch dims."""
    if H.shape[-3] == 0:
        return g.copy()
    return g + np.einsum("...lmn,ln,...lkn->...km", H, phases, z)


def sample_small_scale(ls: LargeScaleRealization, rng: np.random.Generator,
                       size: tuple = ()) -> ChannelRealization:
    """Rician draw(s); ``size`` prepends a batch shape to every array."""
    size = (size,) if isinstance(size, int) else tuple(size)
    K, M, L, N = ls.K, ls.M, ls.L, ls.N
    b0l, b0n = rician_split(ls.beta0, ls.kf0)
    b1l, b1n = rician_split(ls.beta1, ls.kf1)
    b2l, b2n = rician_split(ls.beta2, ls.kf2)

    g = (np.sqrt(b0l)[:, None] * ls.g_bar
         + np.sqrt(b0n)[:, None] * rngmod.crandn(rng, size + (K, M)))
    H = (np.sqrt(b1l)[:, None, None] * ls.H_bar
         + np.sqrt(b1n)[:, None, None] * rngmod.crandn(rng, size + (L, M, N)))
    z = (np.sqrt(b2l)[..., None] * ls.z_bar
         + np.sqrt(b2n)[..., None] * rngmod.crandn(rng, size + (L, K, N)))
    return ChannelRealization(g=g, H=H, z=z, u=aggregate(g, H, ls.phases, z))
