"""Effective-gain estimation at the UE and the NMSE metric.

Scalar estimators (model-based, learned) return complex numbers with zero
imaginary part; NMSE is always taken against the complex truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel_model import LargeScaleRealization
from .downlink import LinkStatistics, simulate_intervals

NMSE_FLOOR_DB = -300.0

FEATURE_NAMES = ("xi", "delta", "power", "mean_alpha_mag")
FEATURE_SETS = {
    "full": (0, 1, 2, 3),
    "baseline_A": (0, 1, 2),
    "baseline_B": (0, 1, 3),
}


@dataclass(frozen=True)
class UeStatistics:
    mean_alpha_kk: complex
    delta_k: float
    power_feature: float
    mc_samples: int


@dataclass(frozen=True)
class FeatureRecord:
    xi_k: float
    delta_k: float
    power_feature: float
    mean_alpha_mag: float
    label_alpha: complex

    def features(self, variant: str = "full") -> np.ndarray:
        full = np.array([self.xi_k, self.delta_k, self.power_feature, self.mean_alpha_mag])
        return full[list(FEATURE_SETS[variant])]


def sample_mean_power(y: np.ndarray) -> np.ndarray | float:
    """Average |y(n)|^2 over the last axis."""
    y = np.asarray(y)
    if y.shape[-1] == 0:
        raise ValueError("no received samples")
    xi = np.mean(np.abs(y) ** 2, axis=-1)
    return float(xi) if xi.ndim == 0 else xi


def _chunks(total: int, chunk: int):
    done = 0
    while done < total:
        n = min(chunk, total - done)
        yield n
        done += n


def ue_statistics(ls: LargeScaleRealization, link: LinkStatistics, k: int,
                  mc_samples: int, rng: np.random.Generator, chunk: int = 250) -> UeStatistics:
    """Genie statistics of UE k from ``mc_samples`` fresh coherence intervals."""
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    sum_alpha = 0.0 + 0.0j
    sum_interf = 0.0
    for n in _chunks(mc_samples, chunk):
        alpha = simulate_intervals(ls, link, rng, n).gains.alpha[:, k, :]
        sum_alpha += alpha[:, k].sum()
        p = np.abs(alpha) ** 2
        sum_interf += float(p.sum() - p[:, k].sum())
    eta = 1.0 / ls.K
    return UeStatistics(
        mean_alpha_kk=complex(sum_alpha / mc_samples),
        delta_k=sum_interf / mc_samples + 1.0,
        power_feature=float(link.rho_d * eta * link.mmse[k].E_norm2_uk),
        mc_samples=mc_samples,
    )


def interference_noise_power(ls: LargeScaleRealization, link: LinkStatistics, k: int,
                             mc_samples: int, rng: np.random.Generator) -> float:
    """delta_k = E{sum_{j != k} |alpha_kj|^2} + 1 by Monte-Carlo."""
    return ue_statistics(ls, link, k, mc_samples, rng).delta_k


def hardening_bound_estimate(stats: UeStatistics) -> complex:
    return stats.mean_alpha_kk


def blind_estimate(xi, delta, mean_alpha):
    """Elementwise sqrt(xi - delta) if xi > delta, else mean_alpha."""
    excess = np.asarray(xi, dtype=float) - np.asarray(delta, dtype=float)
    return np.where(excess > 0, np.sqrt(np.maximum(excess, 0.0)) + 0j, mean_alpha)


def model_based_estimate(xi_k, stats: UeStatistics):
    """sqrt(xi - delta) when positive, otherwise fall back to E{alpha_kk}."""
    est = blind_estimate(xi_k, stats.delta_k, stats.mean_alpha_kk)
    return complex(est) if est.ndim == 0 else est


def build_feature_record(xi_k: float, stats: UeStatistics, label_alpha: complex) -> FeatureRecord:
    values = (xi_k, stats.delta_k, stats.power_feature, abs(stats.mean_alpha_kk))
    if not np.all(np.isfinite(values)) or not np.isfinite(label_alpha):
        raise ValueError(f"non-finite feature record {values}, label {label_alpha}")
    return FeatureRecord(float(values[0]), float(values[1]), float(values[2]),
                         float(values[3]), complex(label_alpha))


def nmse(estimates, truths, floor_db: float = NMSE_FLOOR_DB) -> float:
    """10 log10(sum |alpha - alpha_hat|^2 / sum |alpha|^2), clipped at ``floor_db``."""
    est = np.asarray(estimates, dtype=complex).ravel()
    tru = np.asarray(truths, dtype=complex).ravel()
    if est.shape != tru.shape or est.size == 0:
        raise ValueError("estimates and truths must be non-empty and equally long")
    denom = np.sum(np.abs(tru) ** 2)
    if denom <= 0:
        raise ValueError("all-zero truths")
    ratio = np.sum(np.abs(tru - est) ** 2) / denom
    if ratio <= 0:
        return floor_db
    return max(10.0 * np.log10(ratio), floor_db)
