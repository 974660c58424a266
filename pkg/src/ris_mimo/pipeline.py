"""Dataset generation, persistence, splitting and NMSE experiments."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import rng as rngmod
from .channel_model import Scenario, sample_large_scale
from .downlink import downlink_receive, link_statistics, simulate_intervals
from .neural import DEFAULT_WIDTHS, MlpModel, TrainResult, predict, save_checkpoint, train
from .ue_estimation import FEATURE_SETS, blind_estimate, nmse, sample_mean_power, ue_statistics

log = logging.getLogger(__name__)

DATASET_MAGIC = b"RISDSET\x00"
DATASET_VERSION = 1
RECORD_DTYPE = np.dtype([
    ("large", "<i8"), ("small", "<i8"),
    ("xi", "<f8"), ("delta", "<f8"), ("power", "<f8"), ("mean_alpha_mag", "<f8"),
    ("mean_alpha_re", "<f8"), ("mean_alpha_im", "<f8"),
    ("label_re", "<f8"), ("label_im", "<f8"),
])
FEATURE_FIELDS = ("xi", "delta", "power", "mean_alpha_mag")

ESTIMATORS = ("hardening", "model_based", "learned", "baseline_A", "baseline_B")
LEARNED_VARIANTS = {"learned": "full", "baseline_A": "baseline_A", "baseline_B": "baseline_B"}
REGIMES = ("los_dominated", "nlos_dominated", "probabilistic", "all_nlos", "pure_los")


@dataclass
class ExperimentConfig:
    scenario: Scenario = field(default_factory=Scenario)
    regime: str = "nlos_dominated"
    sizes: list = field(default_factory=lambda: [(40, 25)])
    n_large: int = 200
    n_small: int = 250
    mc_samples: int = 1000
    split_fractions: tuple = (0.2, 0.05, 0.75)
    estimators: tuple = ("hardening", "model_based", "learned")
    epochs: int = 40
    batch: int = 128
    lr: float = 0.01
    seed: int = 0
    flat_split: bool = False
    ue_index: int = 0
    n_bootstrap: int = 1000
    out_dir: str = "results"

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if not self.sizes:
            raise ValueError("at least one (M, N) pair is required")
        self.sizes = [tuple(int(v) for v in s) for s in self.sizes]
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators {sorted(unknown)}")
        if self.n_large < 1 or self.n_small < 1:
            raise ValueError("dataset sizes must be positive")
        if any(f < 0 for f in self.split_fractions) or sum(self.split_fractions) > 1 + 1e-12:
            raise ValueError("split fractions must be non-negative and sum to at most 1")

    @classmethod
    def desk(cls, **kw) -> "ExperimentConfig":
        return cls(**kw)

    @classmethod
    def full_scale(cls, **kw) -> "ExperimentConfig":
        base = dict(sizes=[(40, 25), (100, 64)], n_large=2000, n_small=1000, epochs=200)
        base.update(kw)
        return cls(**base)

    def scenario_for(self, M: int, N: int) -> Scenario:
        return self.scenario.replace(M=M, N=N, link_mode=self.regime, seed=self.seed)

    def split_sizes(self) -> tuple[int, int, int]:
        """(train, val, test) record counts; rounding leftovers go to test."""
        total = self.n_large * self.n_small
        unit = 1 if self.flat_split else self.n_small
        groups = total // unit
        tr = int(np.floor(self.split_fractions[0] * groups)) * unit
        va = int(np.floor(self.split_fractions[1] * groups)) * unit
        return tr, va, total - tr - va

    def to_dict(self) -> dict:
        sc = self.scenario
        scen = {f.name: getattr(sc, f.name) for f in dataclasses.fields(sc)
                if f.name not in ("phase_cfg", "pathloss_cfg")}
        scen["phase_cfg"] = {k: v for k, v in dataclasses.asdict(sc.phase_cfg).items() if k != "theta"}
        scen["pathloss_cfg"] = dataclasses.asdict(sc.pathloss_cfg)
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "scenario"}
        d["scenario"] = scen
        return json.loads(json.dumps(d, default=list))

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Dataset:
    records: np.ndarray
    header: dict

    def __len__(self):
        return len(self.records)

    def features(self, variant: str = "full", idx=None) -> np.ndarray:
        rec = self.records if idx is None else self.records[idx]
        cols = [FEATURE_FIELDS[i] for i in FEATURE_SETS[variant]]
        return np.column_stack([rec[c] for c in cols])

    def labels(self, idx=None) -> np.ndarray:
        rec = self.records if idx is None else self.records[idx]
        return rec["label_re"] + 1j * rec["label_im"]

    def mean_alpha(self, idx=None) -> np.ndarray:
        rec = self.records if idx is None else self.records[idx]
        return rec["mean_alpha_re"] + 1j * rec["mean_alpha_im"]

    @property
    def n_small(self) -> int:
        return int(self.header["n_small"])


def large_scale_block(scenario: Scenario, seed: int, index: int, n_small: int,
                      mc_samples: int, k: int = 0) -> np.ndarray:
    """All records of one large-scale realization for the typical UE ``k``."""
    ls = sample_large_scale(scenario, rngmod.stream(seed, index, rngmod.LARGE_SCALE))
    link = link_statistics(ls, scenario.rho_ul, scenario.tau_p, scenario.rho_d)
    stats = ue_statistics(ls, link, k, mc_samples, rngmod.stream(seed, index, rngmod.STATISTICS))
    batch = simulate_intervals(ls, link, rngmod.stream(seed, index, rngmod.SMALL_SCALE), n_small)
    y = downlink_receive(batch.gains, k, scenario.tau_c - scenario.tau_p,
                         rngmod.stream(seed, index, rngmod.SYMBOLS))
    xi = sample_mean_power(y)
    alpha = batch.gains.alpha[:, k, k]

    out = np.zeros(n_small, dtype=RECORD_DTYPE)
    out["large"] = index
    out["small"] = np.arange(n_small)
    out["xi"] = xi
    out["delta"] = stats.delta_k
    out["power"] = stats.power_feature
    out["mean_alpha_mag"] = abs(stats.mean_alpha_kk)
    out["mean_alpha_re"] = stats.mean_alpha_kk.real
    out["mean_alpha_im"] = stats.mean_alpha_kk.imag
    out["label_re"] = alpha.real
    out["label_im"] = alpha.imag
    if not all(np.all(np.isfinite(out[f])) for f in RECORD_DTYPE.names[2:]):
        raise ValueError(f"non-finite record in large-scale realization {index}")
    return out


def generate_dataset(cfg: ExperimentConfig, M: int, N: int, progress: bool = False) -> Dataset:
    sc = cfg.scenario_for(M, N)
    blocks = []
    t0 = time.perf_counter()
    for i in range(cfg.n_large):
        blocks.append(large_scale_block(sc, cfg.seed, i, cfg.n_small, cfg.mc_samples, cfg.ue_index))
        if progress and (i + 1) % max(1, cfg.n_large // 10) == 0:
            log.info("generated %d/%d large-scale realizations", i + 1, cfg.n_large)
    header = {
        "n_large": cfg.n_large, "n_small": cfg.n_small, "M": M, "N": N,
        "regime": cfg.regime, "seed": cfg.seed, "mc_samples": cfg.mc_samples,
        "ue_index": cfg.ue_index, "config_hash": cfg.config_hash(), "version": __version__,
        "schema": [[name, RECORD_DTYPE[name].str] for name in RECORD_DTYPE.names],
    }
    log.info("dataset %dx%d generated in %.1fs", cfg.n_large, cfg.n_small, time.perf_counter() - t0)
    return Dataset(np.concatenate(blocks), header)


def write_dataset(path, ds: Dataset) -> None:
    """magic(8) | version u32 | header_len u32 | header JSON | records (RECORD_DTYPE, LE)."""
    header = dict(ds.header, n_records=len(ds.records))
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<II", DATASET_VERSION, len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(ds.records, dtype=RECORD_DTYPE).tobytes())


def read_dataset(path) -> Dataset:
    data = Path(path).read_bytes()
    if data[:8] != DATASET_MAGIC:
        raise ValueError(f"{path}: not a dataset file")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != DATASET_VERSION:
        raise ValueError(f"unsupported dataset version {version}")
    header = json.loads(data[16:16 + hlen].decode())
    dtype = np.dtype([(n, t) for n, t in header["schema"]])
    records = np.frombuffer(data, dtype=dtype, offset=16 + hlen).copy()
    if len(records) != header["n_records"]:
        raise ValueError("truncated dataset file")
    return Dataset(records, header)


def export_csv(path, ds: Dataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_DTYPE.names)
        for row in ds.records.tolist():
            w.writerow(row)


def split_dataset(ds: Dataset, train: int, val: int, test: int, seed: int,
                  flat: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Disjoint shuffled index sets.

    By default whole large-scale realizations are assigned to one split,
    so every count must be a multiple of the per-realization record count.
    ``flat=True`` shuffles individual records instead.
    """
    total = len(ds)
    if min(train, val, test) < 0 or train + val + test > total:
        raise ValueError(f"split {train}+{val}+{test} exceeds {total} records")
    rng = rngmod.stream(seed, rngmod.SHUFFLE, 10**6)
    if flat:
        order = rng.permutation(total)
    else:
        unit = ds.n_small
        if train % unit or val % unit or test % unit:
            raise ValueError(f"grouped split sizes must be multiples of {unit}")
        large = np.unique(ds.records["large"])
        chosen = rng.permutation(large)
        by_group = np.argsort(ds.records["large"], kind="stable")
        pos = np.searchsorted(ds.records["large"][by_group], chosen)
        order = np.concatenate([by_group[p:p + unit] for p in pos]) if len(pos) else np.array([], int)
    return order[:train], order[train:train + val], order[train + val:train + val + test]


def train_variant(ds: Dataset, split, variant: str, cfg: ExperimentConfig) -> TrainResult:
    tr, va, _ = split
    X = ds.features(variant)
    y = ds.labels().real
    widths = (X.shape[1],) + DEFAULT_WIDTHS[1:]
    model = MlpModel.initialize(widths, seed=cfg.seed)
    return train(model, X[tr], y[tr], X[va], y[va], epochs=cfg.epochs, batch=cfg.batch,
                 lr=cfg.lr, seed=cfg.seed)


def estimates_for(ds: Dataset, idx, estimator: str, trained: dict | None = None) -> np.ndarray:
    rec = ds.records[idx]
    mean_alpha = rec["mean_alpha_re"] + 1j * rec["mean_alpha_im"]
    if estimator == "hardening":
        return mean_alpha
    if estimator == "model_based":
        return blind_estimate(rec["xi"], rec["delta"], mean_alpha)
    variant = LEARNED_VARIANTS[estimator]
    if not trained or variant not in trained:
        raise KeyError(f"no trained model for estimator {estimator!r}")
    res = trained[variant]
    return predict(res.model, res.normalizer, ds.features(variant, idx))


def bootstrap_nmse(estimates: dict, truths: np.ndarray, n_boot: int, seed: int,
                   level: float = 0.95, groups: np.ndarray | None = None) -> dict:
    """Percentile CIs of NMSE (dB); all estimators share the same resamples.

    With ``groups`` whole clusters (e.g. large-scale realizations) are
    resampled instead of single records.
    """
    rng = rngmod.stream(seed, rngmod.BOOTSTRAP)
    power = np.abs(truths) ** 2
    errs = {k: np.abs(truths - v) ** 2 for k, v in estimates.items()}
    if groups is None:
        sums_p, sums_e = power, errs
    else:
        _, inv = np.unique(groups, return_inverse=True)
        sums_p = np.bincount(inv, weights=power)
        sums_e = {k: np.bincount(inv, weights=e) for k, e in errs.items()}
    n = len(sums_p)
    samples = {k: np.empty(n_boot) for k in estimates}
    for b in range(n_boot):
        idx = rng.integers(0, n, n)
        denom = sums_p[idx].sum()
        for k, e in sums_e.items():
            samples[k][b] = 10 * np.log10(max(e[idx].sum() / denom, 1e-30))
    q = [(1 - level) / 2 * 100, (1 + level) / 2 * 100]
    out = {}
    for k in estimates:
        lo, hi = np.percentile(samples[k], q)
        out[k] = (float(lo), float(hi), samples[k])
    return out


@dataclass
class ResultRow:
    estimator: str
    regime: str
    M: int
    N: int
    nmse_db: float
    ci_low_db: float
    ci_high_db: float
    n_samples: int


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    bootstrap: dict = field(default_factory=dict)

    def get(self, estimator, M, N, regime=None) -> ResultRow:
        for r in self.rows:
            if r.estimator == estimator and r.M == M and r.N == N and (regime is None or r.regime == regime):
                return r
        raise KeyError((estimator, M, N, regime))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["estimator", "regime", "M", "N", "nmse_db", "ci_low_db", "ci_high_db", "n_samples"])
        for r in self.rows:
            w.writerow([r.estimator, r.regime, r.M, r.N, f"{r.nmse_db:.6f}",
                        f"{r.ci_low_db:.6f}", f"{r.ci_high_db:.6f}", r.n_samples])
        return buf.getvalue()


def report_timing(result: TrainResult, ds: Dataset, variant: str, n_predict: int = 100_000) -> dict:
    X = ds.features(variant)
    reps = int(np.ceil(n_predict / len(X)))
    X = np.tile(X, (reps, 1))[:n_predict]
    t0 = time.perf_counter()
    predict(result.model, result.normalizer, X)
    return {"variant": variant, "epochs": len(result.train_loss), "best_epoch": result.best_epoch,
            "training_seconds": result.seconds,
            "inference_seconds_per_1e5": (time.perf_counter() - t0) * 1e5 / n_predict}


def evaluate(ds: Dataset, split, estimators, trained: dict | None, cfg: ExperimentConfig,
             table: ResultTable | None = None) -> ResultTable:
    table = table or ResultTable()
    test = split[2]
    if len(test) == 0:
        raise ValueError("empty test split")
    truth = ds.labels(test)
    est = {e: estimates_for(ds, test, e, trained) for e in estimators}
    boot = bootstrap_nmse(est, truth, cfg.n_bootstrap, cfg.seed)
    M, N = ds.header["M"], ds.header["N"]
    for e in estimators:
        lo, hi, samples = boot[e]
        table.rows.append(ResultRow(e, ds.header["regime"], M, N, nmse(est[e], truth), lo, hi, len(test)))
        table.bootstrap[(e, M, N)] = samples
    return table


def run_experiment(cfg: ExperimentConfig, write: bool = True, datasets: dict | None = None) -> ResultTable:
    """Generate, split, train and evaluate every (M, N) cell of ``cfg``.

    ``datasets`` may map (M, N) to a pre-built Dataset to skip generation.
    Writes ``results.csv`` and ``manifest.json`` into ``cfg.out_dir``.
    """
    out = Path(cfg.out_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
    table = ResultTable()
    manifest = {"version": __version__, "seed": cfg.seed, "config_hash": cfg.config_hash(),
                "config": cfg.to_dict(), "cells": []}
    variants = [LEARNED_VARIANTS[e] for e in cfg.estimators if e in LEARNED_VARIANTS]
    for M, N in cfg.sizes:
        ds = (datasets or {}).get((M, N))
        if ds is None:
            ds = generate_dataset(cfg, M, N, progress=True)
        split = split_dataset(ds, *cfg.split_sizes(), seed=cfg.seed, flat=cfg.flat_split)
        trained, timing = {}, []
        for v in variants:
            trained[v] = train_variant(ds, split, v, cfg)
            timing.append(report_timing(trained[v], ds, v))
            if write:
                save_checkpoint(out / f"model_{v}_M{M}_N{N}.ckpt", trained[v].model, trained[v].normalizer,
                                {"variant": v, "M": M, "N": N, "seed": cfg.seed,
                                 "config_hash": cfg.config_hash()})
        evaluate(ds, split, cfg.estimators, trained, cfg, table)
        table.timing[(M, N)] = timing
        digest = hashlib.sha256(ds.records.tobytes()).hexdigest()[:16]
        manifest["cells"].append({"M": M, "N": N, "dataset_sha256": digest, "n_records": len(ds),
                                  "split": [len(s) for s in split], "timing": timing})
    if write:
        (out / "results.csv").write_text(table.to_csv())
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return table
