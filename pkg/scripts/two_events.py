"""Committed budget when protecting one event, another, or both at once (shared seeds).

    python scripts/two_events.py --runs 100
"""
from pathlib import Path

from priste.experiments import ExperimentConfig, run_experiment

from _common import parser, per_timestamp, plot_curves, write_rows


def main():
    p = parser(__doc__.splitlines()[0])
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.2)
    args = p.parse_args()
    out = Path(args.out)
    setups = {"first": ((4, 8),), "second": ((16, 20),), "both": ((4, 8), (16, 20))}
    rows, curves = [], {}
    for name, windows in setups.items():
        cfg = ExperimentConfig(epsilon=args.epsilon, alpha=args.alpha, windows=windows, runs=args.runs,
                               seed=args.seed, horizon=args.horizon)
        res = run_experiment(cfg)
        rows += per_timestamp(name, res.alphas)
        curves[name] = res.alphas.mean(0)
        print(f"{name}: mean committed alpha {res.alphas.mean():.4f}")
    write_rows(out / "two_events.csv", ["config", "t", "mean_alpha", "sd_alpha"], rows)
    if args.plot:
        plot_curves(out / "two_events.png", curves, "mean committed alpha")


if __name__ == "__main__":
    main()
