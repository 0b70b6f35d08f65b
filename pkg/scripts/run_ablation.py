"""Full six-variant ablation on a synthetic dataset; prints a mean/std table.

    python3 scripts/run_ablation.py --n-per-class 100 --seeds 0,1,2,3,4 --out ablation.csv
"""
import argparse
import logging
import time

import numpy as np

from spikescope.ablation import VARIANTS, VariantConfig, ablation_csv, run_ablation_suite
from spikescope.datagen import GenConfig, make_dataset
from spikescope.train import OptConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-per-class", type=int, default=100)
    ap.add_argument("--data-seed", type=int, default=0)
    ap.add_argument("--noise", type=float, default=0.3)
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--variants", default=",".join(VARIANTS))
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    ds = make_dataset(args.n_per_class, args.data_seed, GenConfig(noise=args.noise))
    seeds = [int(s) for s in args.seeds.split(",")]
    variants = [VariantConfig.default(v) for v in args.variants.split(",")]
    t0 = time.perf_counter()
    rows = run_ablation_suite(ds, variants, seeds, opt_cfg=OptConfig(epochs=args.epochs))
    print(f"\n{'variant':12s} {'mean':>6s} {'std':>6s}   ({len(seeds)} seeds, {time.perf_counter() - t0:.0f} s)")
    for v in variants:
        accs = [r.overall_accuracy for r in rows if r.variant == v.name]
        print(f"{v.name:12s} {np.mean(accs):6.3f} {np.std(accs):6.3f}")
    if args.out:
        with open(args.out, "w") as f:
            f.write(ablation_csv(rows))


if __name__ == "__main__":
    main()
