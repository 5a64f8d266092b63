"""Sweep compression ratio k at a fixed input frame count.

Every cell sees the same clips; what changes is how many decoder tokens
survive compression (N_input * l / k). Each cell trains its own model from a
cell-derived seed, so re-running with the same arguments reproduces the CSV
byte for byte.

Usage:
    python3 scripts/run_fixed_frames_grid.py --out results_ff.csv
    python3 scripts/run_fixed_frames_grid.py --quick   # 2-step smoke run
"""
import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from framefuse.grid import ExperimentSpec, GridAxis, results_to_csv, run_grid
from framefuse.report import read_table_csv, render_table
from framefuse.training import TrainConfig


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n-input", type=int, default=16)
    ap.add_argument("--k", type=int, nargs="+", default=[2, 4, 8, 16])
    ap.add_argument("--steps", type=int, default=600)
    ap.add_argument("--per-category", type=int, default=40)
    ap.add_argument("--eval-per-category", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results_fixed_frames.csv")
    ap.add_argument("--quick", action="store_true",
                    help="2 training steps per cell, tiny dataset")
    args = ap.parse_args()

    if args.quick:
        train = TrainConfig(total_steps=2, warmup_steps=1, batch=4, seed=args.seed)
        per_cat, eval_cat = 2, 2
    else:
        train = TrainConfig(total_steps=args.steps,
                            warmup_steps=max(args.steps // 10, 1),
                            seed=args.seed)
        per_cat, eval_cat = args.per_category, args.eval_per_category

    spec = ExperimentSpec(axis=GridAxis.FIXED_FRAMES, n_input=args.n_input,
                          k_values=tuple(args.k), seed=args.seed, train=train,
                          train_per_category=per_cat, eval_per_category=eval_cat)
    start = time.monotonic()
    results = run_grid(spec)
    text = results_to_csv(results, include_flops=True)
    Path(args.out).write_text(text)
    print(f"{len(results)} cells in {time.monotonic() - start:.1f}s -> {args.out}")
    print()
    print(render_table(read_table_csv(text), "md"), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
