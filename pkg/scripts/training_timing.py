#!/usr/bin/env python3
"""Wall-clock training and inference time for each input-feature set.

Times are hardware dependent; they are reported, never asserted.

    python scripts/training_timing.py --n-large 100 --epochs 40
"""

import argparse
import json

from ris_mimo.pipeline import (LEARNED_VARIANTS, ExperimentConfig, generate_dataset,
                               report_timing, split_dataset, train_variant)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--M", type=int, default=40)
    ap.add_argument("--N", type=int, default=25)
    ap.add_argument("--n-large", type=int, default=200)
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = ExperimentConfig.desk(sizes=[(args.M, args.N)], n_large=args.n_large,
                                epochs=args.epochs, seed=args.seed)
    ds = generate_dataset(cfg, args.M, args.N)
    split = split_dataset(ds, *cfg.split_sizes(), seed=cfg.seed)
    rows = []
    for variant in LEARNED_VARIANTS.values():
        result = train_variant(ds, split, variant, cfg)
        rows.append(report_timing(result, ds, variant))
    print(f"{'variant':<12}{'features':>9}{'train s':>10}{'infer s/1e5':>13}{'best epoch':>12}")
    for r in rows:
        n_feat = ds.features(r["variant"]).shape[1]
        print(f"{r['variant']:<12}{n_feat:>9}{r['training_seconds']:>10.2f}"
              f"{r['inference_seconds_per_1e5']:>13.4f}{r['best_epoch']:>12}")
    print(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
