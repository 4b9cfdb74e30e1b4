"""Delta-location-set loop: committed budget and distortion as delta grows.

    python scripts/delta_sweep.py --runs 100 --alphas 0.2 1.0
"""
from pathlib import Path

from priste.experiments import ExperimentConfig, run_experiment
from priste.runtime import DELTALOC

from _common import parser, write_rows


def main():
    p = parser(__doc__.splitlines()[0])
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--alphas", type=float, nargs="+", default=[1.0])
    p.add_argument("--deltas", type=float, nargs="+", default=[0.0, 0.1, 0.3, 0.6])
    args = p.parse_args()
    rows = []
    for alpha in args.alphas:
        for delta in args.deltas:
            cfg = ExperimentConfig(algorithm=DELTALOC, epsilon=args.epsilon, alpha=alpha, delta=delta,
                                   runs=args.runs, seed=args.seed, horizon=args.horizon)
            res = run_experiment(cfg)
            rows.append((alpha, delta, float(res.alphas.mean()), float(res.distances.mean()),
                         float((res.attempts == 1).mean())))
            print(f"alpha={alpha} delta={delta}: mean alpha {rows[-1][2]:.4f}, "
                  f"mean distance {rows[-1][3]:.3f} km, first-draw commits {rows[-1][4]:.3f}")
    write_rows(Path(args.out) / "delta_sweep.csv",
               ["alpha", "delta", "mean_alpha", "mean_dist_km", "first_draw_fraction"], rows)


if __name__ == "__main__":
    main()
