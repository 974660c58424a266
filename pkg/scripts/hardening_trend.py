#!/usr/bin/env python3
"""Relative variance of the desired-signal gain against array size.

Prints var(alpha_kk) / |E{alpha_kk}|^2 averaged over UEs and large-scale
draws, with and without the RIS links, as CSV.

    python scripts/hardening_trend.py --sizes 20 40 100 --n-large 200
"""

import argparse
import csv
import sys

import numpy as np

from ris_mimo import rng as rngmod
from ris_mimo.channel_model import Scenario, sample_large_scale
from ris_mimo.downlink import gain_relative_variance, link_statistics


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[20, 40, 100])
    ap.add_argument("--N", type=int, default=25)
    ap.add_argument("--link-mode", default="all_nlos")
    ap.add_argument("--n-large", type=int, default=200)
    ap.add_argument("--n-small", type=int, default=200)
    ap.add_argument("--seed", type=int, default=10)
    args = ap.parse_args()

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["M", "N", "with_ris", "without_ris"])
    for M in args.sizes:
        sc = Scenario(M=M, N=args.N, link_mode=args.link_mode, seed=args.seed)
        both = {True: [], False: []}
        for i in range(args.n_large):
            ls = sample_large_scale(sc, rngmod.stream(sc.seed, i, rngmod.LARGE_SCALE))
            for keep in (True, False):
                cur = ls if keep else ls.without_ris()
                link = link_statistics(cur, sc.rho_ul, sc.tau_p, sc.rho_d)
                rng = rngmod.stream(sc.seed, i, rngmod.SMALL_SCALE)
                both[keep].append(gain_relative_variance(cur, link, rng, args.n_small).mean())
        w.writerow([M, args.N, f"{np.mean(both[True]):.6f}", f"{np.mean(both[False]):.6f}"])


if __name__ == "__main__":
    main()
