"""Per-timestamp committed budget for several epsilons (planar Laplace loop).

    python scripts/budget_curves.py --runs 100 --plot
"""
from pathlib import Path

import numpy as np
from scipy.stats import mannwhitneyu

from priste.experiments import ExperimentConfig, run_experiment
from priste.runtime import window_mean

from _common import parser, per_timestamp, plot_curves, write_rows


def main():
    p = parser(__doc__.splitlines()[0])
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--epsilons", type=float, nargs="+", default=[0.1, 0.5, 1.0])
    args = p.parse_args()
    out = Path(args.out)
    rows, curves, inside = [], {}, {}
    for eps in args.epsilons:
        cfg = ExperimentConfig(epsilon=eps, alpha=args.alpha, runs=args.runs, seed=args.seed, horizon=args.horizon)
        res = run_experiment(cfg)
        ev = res.events[0]
        rows += per_timestamp(f"eps={eps}", res.alphas)
        curves[f"eps={eps}"] = res.alphas.mean(0)
        inside[eps] = np.array([window_mean(a, ev)[0] for a in res.alphas])
        ins, outs = window_mean(res.alphas, ev)
        print(f"eps={eps}: mean alpha inside window {ins:.4f}, outside {outs:.4f}, "
              f"first-draw commits {(res.attempts == 1).mean():.3f}")
    for a, b in zip(args.epsilons, args.epsilons[1:]):
        pv = mannwhitneyu(inside[a], inside[b], alternative="less").pvalue
        print(f"in-window budget eps={a} < eps={b}: Mann-Whitney p = {pv:.2e}")
    write_rows(out / "budget_curves.csv", ["config", "t", "mean_alpha", "sd_alpha"], rows)
    if args.plot:
        plot_curves(out / "budget_curves.png", curves, "mean committed alpha", window=(4, 8))


if __name__ == "__main__":
    main()
