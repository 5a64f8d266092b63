"""Token budget and forward-flop accounting across methods and ratios.

No training involved: this tabulates where compute goes as k grows. Encoder
attention length rises for through-encoder grouping while the decoder's
video sequence shrinks as N_input * l / k, which is the trade the fusion
methods are negotiating.

Usage:
    python3 scripts/budget_flops_table.py --n-input 16
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from framefuse.frontend import COMPRESSION_METHODS, FusionMethod
from framefuse.pipeline import ModelConfig, model_flops_per_clip
from framefuse.report import ReportTable, render_table


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n-input", type=int, default=16)
    ap.add_argument("--k", type=int, nargs="+", default=[1, 2, 4, 8, 16])
    ap.add_argument("--patch", type=int, default=14)
    args = ap.parse_args()

    rows = []
    for k in args.k:
        if args.n_input % k:
            print(f"skipping k={k}: does not divide {args.n_input} frames")
            continue
        methods = [FusionMethod.BASELINE] if k == 1 else list(COMPRESSION_METHODS)
        for method in methods:
            cfg = ModelConfig(method=method, k=k, n_input=args.n_input,
                              patch=args.patch)
            rows.append({"method": method.value, "k": str(k),
                         "n_input": str(args.n_input),
                         "l_decoder": str(cfg.budget.l_decoder),
                         "flops_per_clip": str(model_flops_per_clip(cfg))})

    table = ReportTable(columns=("method", "k", "n_input", "l_decoder",
                                 "flops_per_clip"), rows=rows,
                        caption=f"budget and flops at {args.n_input} input frames")
    print(render_table(table, "md"), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
