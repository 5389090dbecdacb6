"""Desk Temporal-Motif: DyCIL vs ablations, plus the per-epoch motif-recall curve.

    python scripts/motif_ablation.py --out results/motif [--seeds 0 1 2] [--variants full no_sg no_am no_eg]
"""
import argparse
import json
import logging
from pathlib import Path

import numpy as np

from dycil.desk import motif_ablation
from dycil.experiment import write_case_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/motif")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--variants", nargs="+", default=["full", "no_sg"])
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    runs = motif_ablation(args.seeds, args.variants)
    table = {}
    for r in runs:
        table.setdefault(r.variant, []).append(r.test_at_best)
        if r.curve:
            write_case_csv(out / f"case_study_seed{r.seed}.csv", r.curve)
    summary = {v: {"mean": float(np.mean(x)), "std": float(np.std(x, ddof=1)) if len(x) > 1 else 0.0, "runs": x}
               for v, x in table.items()}
    (out / "ablation.json").write_text(json.dumps(summary, indent=2) + "\n")
    for v, s in summary.items():
        print(f"{v:10s} test ACC {s['mean']:.4f} +- {s['std']:.4f}")


if __name__ == "__main__":
    main()
