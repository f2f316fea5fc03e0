#!/usr/bin/env python3
"""Sweep the cooperative/skewed client mix and tabulate final fairness.

For each cooperative count the sweep runs the validation-weighted strategy
with ranking on and off, replicated over several seeds, and prints the
mean final-round metrics per cell.  Full artifacts (per-round CSV/JSONL,
final models, summary.csv) land under --out-dir.

Usage:
    python3 scripts/run_ratio_sweep.py --out-dir runs/ratio_sweep
    python3 scripts/run_ratio_sweep.py --counts 0 5 10 --rounds 80 --seeds 7 8
"""

import argparse

from fedval.data import ClientSpec, SkewSpec
from fedval.harness import (
    ExperimentConfig,
    SweepSpec,
    SweepVariant,
    SyntheticSpec,
    run_sweep,
)
from fedval.metrics import ObjectiveSpec
from fedval.model import TrainConfig
from fedval.server import RankingConfig


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out-dir", default="runs/ratio_sweep")
    p.add_argument("--clients", type=int, default=10, help="total client count")
    p.add_argument("--counts", type=int, nargs="+", default=[0, 3, 5, 8, 10],
                   help="cooperative counts to sweep")
    p.add_argument("--seeds", type=int, nargs="+", default=[101, 202, 303],
                   help="replicate seeds")
    p.add_argument("--rounds", type=int, default=60)
    p.add_argument("--n", type=int, default=4000, help="synthetic dataset size")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--skew-ratio", type=float, default=0.2,
                   help="positive-rate ratio forced onto skewed clients")
    p.add_argument("--lr", type=float, default=0.2)
    return p.parse_args()


def main():
    args = parse_args()
    base = ExperimentConfig(
        strategy="fedval",
        rounds=args.rounds,
        seed=0,
        data=SyntheticSpec(n=args.n, dim=args.dim, positive_rates=(0.5, 0.5)),
        clients=tuple(
            ClientSpec("uncooperative", SkewSpec(ratio=args.skew_ratio))
            for _ in range(args.clients)
        ),
        train=TrainConfig(epochs=1, batch_size=32, lr=args.lr, seed=0),
        validation_fraction=0.25,
        objectives=ObjectiveSpec((("accuracy", 1.0), ("spd", 1.0), ("eod", 1.0))),
        ranking=RankingConfig(enabled=True, initial_step=2.0, step_size=1.5),
        out_dir=args.out_dir,
    )
    spec = SweepSpec(
        cooperative_counts=tuple(args.counts),
        variants=(SweepVariant("rank", True), SweepVariant("norank", False)),
        replicate_seeds=tuple(args.seeds),
    )

    result = run_sweep(spec, base)

    failed = [c for c in result.cells if c.error is not None]
    for cell in failed:
        print(f"FAILED coop={cell.cooperative_count} {cell.variant} "
              f"seed={cell.seed}: {cell.error}")

    print(f"{'coop':>4} {'variant':>7} {'acc':>7} {'spd':>7} {'eod':>7}   (means over seeds)")
    for row in result.summary_rows:
        print(f"{row['cooperative_count']:>4} {row['variant']:>7} "
              f"{row['final_accuracy_mean']:7.4f} {row['final_spd_mean']:7.4f} "
              f"{row['final_eod_mean']:7.4f}")
    print(f"\nsummary written to {result.summary_path}")


if __name__ == "__main__":
    main()
