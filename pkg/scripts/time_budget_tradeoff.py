"""Unknown decisions and committed budget as the checker time budget grows.

Both the closed loop (each budget drives its own session) and fixed release
histories (every budget calibrates against the same committed trace) are
reported.

    python scripts/time_budget_tradeoff.py --runs 4 --horizon 12
"""
from pathlib import Path

import numpy as np

from priste.checker import Decision
from priste.experiments import ExperimentConfig, run_experiment
from priste.runtime import PrivacySession, calibrate_on_history

from _common import parser, write_rows


def _unknowns(records):
    return sum(d is Decision.UNKNOWN for rec in records for d in rec.decision_path)


def main():
    p = parser(__doc__.splitlines()[0], runs=4)
    p.add_argument("--budgets", type=float, nargs="+", default=[0.01, 0.1, 1.0])
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--alpha", type=float, default=1.0)
    args = p.parse_args()
    base = ExperimentConfig(runs=args.runs, seed=args.seed, horizon=args.horizon, alpha=args.alpha,
                            restarts=args.restarts, time_budget=max(args.budgets))
    reference = run_experiment(base)
    rows = []
    for budget in args.budgets:
        cfg = base.with_(time_budget=budget)
        closed = run_experiment(cfg)
        rows.append(("closed_loop", budget, sum(_unknowns(r.records) for r in closed.results),
                     float(closed.alphas.mean())))
        fixed, alphas = 0, []
        for k, ref in enumerate(reference.results):
            s = PrivacySession(cfg.session_config(), reference.M, reference.events, cfg.grid,
                               seed=np.random.default_rng([cfg.seed + k, 1]))
            recs = calibrate_on_history(s, [r.true_cell for r in ref.records],
                                        [(r.released_cell, c) for r, c in zip(ref.records, ref.columns)])
            fixed += _unknowns(recs)
            alphas += [r.final_alpha for r in recs]
        rows.append(("fixed_history", budget, fixed, float(np.mean(alphas))))
        for r in rows[-2:]:
            print(f"{r[0]} budget {budget}s: {r[2]} unknown, mean alpha {r[3]:.4f}")
    write_rows(Path(args.out) / "time_budget_tradeoff.csv", ["workload", "time_budget", "unknown", "mean_alpha"],
               rows)


if __name__ == "__main__":
    main()
