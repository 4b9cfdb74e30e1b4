"""Enumeration vs two-world runtime over event length and width, plus the checker path vs map size.

    python scripts/runtime_scaling.py --events 10
"""
import argparse
from pathlib import Path

from priste.benchmark import (BenchConfig, checker_path_sweep, length_sweep, loglinear_fit, loglog_fit,
                              width_sweep, write_bench_csv)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--events", type=int, default=10, help="random events per point")
    p.add_argument("--ceiling", type=float, default=120.0, help="seconds per sweep")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results/scripts")
    args = p.parse_args()
    cfg = BenchConfig(events_per_point=args.events, ceiling=args.ceiling, seed=args.seed)
    points = length_sweep(cfg, print) + width_sweep(cfg, print) + checker_path_sweep(cfg, print)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_bench_csv(out / "runtime_scaling.csv", points)
    for sweep, method, fit in (("length", "oracle", loglinear_fit), ("length", "two_world", loglinear_fit),
                               ("map_size", "checker", loglog_fit)):
        pts = [q for q in points if q.sweep == sweep and q.method == method]
        _, b, r2 = fit([q.x for q in pts], [q.mean for q in pts])
        print(f"{sweep}/{method}: {fit.__name__} slope {b:.3f}, R^2 {r2:.4f}")


if __name__ == "__main__":
    main()
