"""Command-line entry point: ``ris-mimo <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .channel_model import Scenario, sample_large_scale
from .config import experiment_from, load_config
from .downlink import downlink_receive, link_statistics, simulate_intervals
from .neural import TrainResult, TrainingDiverged, load_checkpoint, save_checkpoint
from .pipeline import (ESTIMATORS, LEARNED_VARIANTS, REGIMES, ExperimentConfig, evaluate,
                       export_csv, generate_dataset, read_dataset, report_timing, run_experiment,
                       split_dataset, train_variant, write_dataset)
from .ue_estimation import model_based_estimate, sample_mean_power, ue_statistics

log = logging.getLogger("ris_mimo")


def _size(text):
    m, n = text.lower().split("x")
    return int(m), int(n)


def _experiment(args) -> ExperimentConfig:
    scenario, overrides = load_config(args.config) if args.config else (Scenario(), {})
    cli = {k: getattr(args, k, None) for k in
           ("seed", "regime", "n_large", "n_small", "mc_samples", "epochs", "batch", "lr",
            "n_bootstrap", "out_dir")}
    if getattr(args, "sizes", None):
        cli["sizes"] = args.sizes
    if getattr(args, "estimators", None):
        cli["estimators"] = tuple(args.estimators)
    if getattr(args, "flat", False):
        cli["flat_split"] = True
    return experiment_from(scenario, overrides, **cli)


def _common(p, sizes=True):
    p.add_argument("--config", help="INI scenario/experiment file")
    p.add_argument("--seed", type=int)
    p.add_argument("--regime", choices=REGIMES)
    if sizes:
        p.add_argument("--sizes", type=_size, nargs="+", metavar="MxN")


def cmd_simulate(args) -> int:
    cfg = _experiment(args)
    M, N = cfg.sizes[0]
    sc = cfg.scenario_for(M, N)
    i = args.index
    ls = sample_large_scale(sc, rngmod.stream(cfg.seed, i, rngmod.LARGE_SCALE))
    link = link_statistics(ls, sc.rho_ul, sc.tau_p, sc.rho_d)
    batch = simulate_intervals(ls, link, rngmod.stream(cfg.seed, i, rngmod.SMALL_SCALE), 1)
    alpha = batch.gains.alpha[0]
    ues = []
    for k in range(sc.K):
        stats = ue_statistics(ls, link, k, cfg.mc_samples, rngmod.stream(cfg.seed, i, rngmod.STATISTICS, k))
        y = downlink_receive(batch.gains, k, sc.tau_c - sc.tau_p,
                             rngmod.stream(cfg.seed, i, rngmod.SYMBOLS, k))[0]
        xi = sample_mean_power(y)
        mb = model_based_estimate(xi, stats)
        ues.append({
            "k": k, "position": ls.ue_positions[k].tolist(),
            "beta0_db": float(10 * np.log10(ls.beta0[k])), "los0": bool(ls.los0[k]),
            "alpha_kk": [alpha[k, k].real, alpha[k, k].imag],
            "xi": xi, "delta": stats.delta_k, "power_feature": stats.power_feature,
            "hardening": [stats.mean_alpha_kk.real, stats.mean_alpha_kk.imag],
            "model_based": [mb.real, mb.imag],
            "uhat_error": float(np.linalg.norm(batch.u_hat[0, k] - batch.channel.u[0, k])
                                / np.linalg.norm(batch.channel.u[0, k])),
        })
    dump = {"seed": cfg.seed, "index": i, "M": M, "N": N, "regime": cfg.regime,
            "rho_ul": sc.rho_ul, "rho_d": sc.rho_d, "ues": ues,
            "alpha_abs": np.abs(alpha).round(6).tolist()}
    print(json.dumps(dump, indent=2))
    return 0


def cmd_gen_dataset(args) -> int:
    cfg = _experiment(args)
    M, N = cfg.sizes[0]
    ds = generate_dataset(cfg, M, N, progress=True)
    write_dataset(args.out, ds)
    if args.csv:
        export_csv(args.csv, ds)
    log.info("wrote %d records to %s", len(ds), args.out)
    return 0


def cmd_split(args) -> int:
    ds = read_dataset(args.dataset)
    total = len(ds)
    unit = 1 if args.flat else ds.n_small
    train = args.train if args.train is not None else int(0.2 * total / unit) * unit
    val = args.val if args.val is not None else int(0.05 * total / unit) * unit
    test = args.test if args.test is not None else total - train - val
    tr, va, te = split_dataset(ds, train, val, test, args.seed, flat=args.flat)
    np.savez(args.out, train=tr, val=va, test=te, seed=args.seed, flat=args.flat)
    log.info("split %d/%d/%d -> %s", len(tr), len(va), len(te), args.out)
    return 0


def _load_split(path):
    with np.load(path) as z:
        return z["train"], z["val"], z["test"]


def cmd_train(args) -> int:
    cfg = _experiment(args)
    ds = read_dataset(args.dataset)
    split = _load_split(args.split)
    result = train_variant(ds, split, args.variant, cfg)
    meta = {"variant": args.variant, "seed": cfg.seed, "M": ds.header["M"], "N": ds.header["N"],
            "dataset_config_hash": ds.header["config_hash"], "best_epoch": result.best_epoch}
    save_checkpoint(args.out, result.model, result.normalizer, meta)
    manifest_path = Path(args.manifest or Path(args.out).with_name("manifest.json"))
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
    manifest.setdefault("training", []).append(dict(report_timing(result, ds, args.variant),
                                                    checkpoint=str(args.out), seed=cfg.seed))
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    log.info("best validation epoch %d, checkpoint %s", result.best_epoch, args.out)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _experiment(args)
    ds = read_dataset(args.dataset)
    split = _load_split(args.split)
    trained = {}
    for item in args.models or []:
        variant, path = item.split("=", 1)
        model, norm, _ = load_checkpoint(path)
        trained[variant] = TrainResult(model, norm)
    estimators = tuple(args.estimators or ["hardening", "model_based"]
                       + [e for e, v in LEARNED_VARIANTS.items() if v in trained])
    table = evaluate(ds, split, estimators, trained, cfg)
    Path(args.out).write_text(table.to_csv())
    sys.stdout.write(table.to_csv())
    return 0


def cmd_compare(args) -> int:
    cfg = _experiment(args)
    table = run_experiment(cfg)
    sys.stdout.write(table.to_csv())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ris-mimo", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one coherence interval, verbose JSON dump")
    _common(p)
    p.add_argument("--index", type=int, default=0, help="large-scale realization index")
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen-dataset", help="generate a feature dataset")
    _common(p)
    p.add_argument("--n-large", dest="n_large", type=int)
    p.add_argument("--n-small", dest="n_small", type=int)
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument("--out", default="dataset.bin")
    p.add_argument("--csv", help="also export records as CSV")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("split", help="train/validation/test index sets")
    p.add_argument("--dataset", default="dataset.bin")
    p.add_argument("--train", type=int)
    p.add_argument("--val", type=int)
    p.add_argument("--test", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--flat", action="store_true", help="split records instead of realizations")
    p.add_argument("--out", default="split.npz")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train one estimator network")
    _common(p, sizes=False)
    p.add_argument("--dataset", default="dataset.bin")
    p.add_argument("--split", default="split.npz")
    p.add_argument("--variant", default="full", choices=sorted(set(LEARNED_VARIANTS.values())))
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--out", default="model.ckpt")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="NMSE of estimators on the test split")
    _common(p, sizes=False)
    p.add_argument("--dataset", default="dataset.bin")
    p.add_argument("--split", default="split.npz")
    p.add_argument("--models", nargs="*", metavar="VARIANT=PATH")
    p.add_argument("--estimators", nargs="+", choices=ESTIMATORS)
    p.add_argument("--n-bootstrap", dest="n_bootstrap", type=int)
    p.add_argument("--out", default="results.csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="full multi-estimator NMSE experiment")
    _common(p)
    p.add_argument("--estimators", nargs="+", choices=ESTIMATORS)
    p.add_argument("--n-large", dest="n_large", type=int)
    p.add_argument("--n-small", dest="n_small", type=int)
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--n-bootstrap", dest="n_bootstrap", type=int)
    p.add_argument("--flat", action="store_true")
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, ArithmeticError, TrainingDiverged, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
