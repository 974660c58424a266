#!/usr/bin/env python3
"""NMSE of every estimator per regime and array size.

Writes one results.csv + manifest.json per regime under --out.

    python scripts/baseline_comparison.py --profile desk --out runs/baselines
"""

import argparse
import logging
from pathlib import Path

from ris_mimo.pipeline import ExperimentConfig, run_experiment

ESTIMATORS = ("hardening", "model_based", "learned")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--profile", choices=("desk", "full"), default="desk")
    ap.add_argument("--regimes", nargs="+", default=["los_dominated", "nlos_dominated"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/baselines")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    factory = ExperimentConfig.full_scale if args.profile == "full" else ExperimentConfig.desk
    for regime in args.regimes:
        cfg = factory(regime=regime, estimators=ESTIMATORS, seed=args.seed,
                      out_dir=str(Path(args.out) / regime))
        table = run_experiment(cfg)
        print(f"# {regime}")
        print(table.to_csv(), end="")


if __name__ == "__main__":
    main()
