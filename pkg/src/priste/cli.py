"""Command-line experiment driver.

    priste --mode release-geoind --epsilon 0.5 --alpha 0.2 --runs 100 --out results/
    priste --mode quantify --config run.toml --out leakage.csv

Settings come from built-in defaults, then a flat TOML file (``--config``),
then flags; later sources win. ``PRISTE_THREADS`` caps the worker count used
to shard runs.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import oracle
from .benchmark import (BenchConfig, checker_path_sweep, length_sweep, loglinear_fit, loglog_fit,
                        width_sweep, write_bench_csv)
from .events import Event, EventKind, GridMap, Region, load_events
from .experiments import ExperimentConfig, run_experiment, standard_events
from .lppm import plm_emission_matrix, sample_row, uniform_emission_matrix
from .markov import (DegenerateEventError, _log_joint_terms, leakage_ratio, load_transition_csv,
                     prior_probability, validate_distribution)
from .runtime import DELTALOC, GEOIND, summarize, write_run_log, write_summary
from .simkit import BoundingBox, gaussian_transition, generate_trajectory, ingest_csv

log = logging.getLogger("priste")

MODES = ("quantify", "release-geoind", "release-deltaloc", "oracle-compare", "bench")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str = ""
    width: int = 20
    height: int = 20
    cell_size: float = 1.0
    sigma: float = 5.0
    transition: str | None = None       # CSV path; replaces the Gaussian model
    trajectory: str | None = None       # CSV path; replaces synthetic trajectories
    bbox: list[float] | None = None     # lat_min, lat_max, lon_min, lon_max for lat/lon CSVs
    events: str | None = None           # JSON path; default is the standard presence event
    horizon: int = 50
    epsilon: float = 0.5
    alpha: float = 0.2
    delta: float = 0.1
    decay: float = 0.5
    runs: int = 100
    seed: int = 0
    out: str = "results"
    time_budget: float = 1.0
    pi: str = "uniform"                 # "uniform" or a CSV path (quantify)
    emission: str = "plm"               # "plm", "uniform" or a CSV path (quantify)
    instances: int = 100                # oracle-compare
    oracle_cap: int = oracle.DEFAULT_CAP
    bench_events: int = 100
    bench_ceiling: float = 300.0

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"--mode must be one of {', '.join(MODES)}")
        if self.width < 1 or self.height < 1 or not self.cell_size > 0:
            raise ConfigError("map dimensions and cell_size must be positive")
        if self.transition is None and not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if self.mode.startswith("release"):
            if not self.epsilon >= 0:
                raise ConfigError("epsilon must be non-negative")
            if not self.alpha > 0:
                raise ConfigError("alpha must be positive")
            if not 0 < self.decay < 1:
                raise ConfigError("decay must lie in (0, 1)")
            if self.runs < 1:
                raise ConfigError("runs must be >= 1")
            if not self.time_budget > 0:
                raise ConfigError("time_budget must be positive")
        if self.mode == "release-deltaloc" and not 0 <= self.delta < 1:
            raise ConfigError("delta must lie in [0, 1)")
        if self.mode == "quantify" and self.emission == "plm" and not self.alpha > 0:
            raise ConfigError("alpha must be positive for the plm emission")
        if self.bbox is not None and len(self.bbox) != 4:
            raise ConfigError("bbox needs lat_min, lat_max, lon_min, lon_max")

    @property
    def grid(self) -> GridMap:
        return GridMap(self.width, self.height, self.cell_size)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def load_toml(path) -> dict:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    out = {}
    for key, val in data.items():
        name = key.replace("-", "_")
        if isinstance(val, dict):
            raise ConfigError(f"{path}: nested table [{key}] not supported; use flat keys")
        if name not in _FIELDS:
            raise ConfigError(f"{path}: unknown key {key!r}")
        out[name] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="priste", description=__doc__.split("\n\n")[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--config", help="flat TOML file with any of the settings below")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha", type=float, help="initial planar Laplace budget, per km")
    p.add_argument("--delta", type=float)
    p.add_argument("--decay", type=float)
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--time-budget", type=float, help="seconds per checker call")
    p.add_argument("--events", help="JSON event file")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--cell-size", type=float, help="km per cell edge")
    p.add_argument("--sigma", type=float, help="mobility kernel scale, km")
    p.add_argument("--transition", help="transition matrix CSV")
    p.add_argument("--trajectory", help="trajectory CSV (t,cell or t,lat,lon)")
    p.add_argument("--bbox", type=float, nargs=4, metavar=("LAT_MIN", "LAT_MAX", "LON_MIN", "LON_MAX"))
    p.add_argument("--horizon", type=int)
    p.add_argument("--pi", help="'uniform' or initial distribution CSV (quantify)")
    p.add_argument("--emission", help="'plm', 'uniform' or emission matrix CSV (quantify)")
    p.add_argument("--instances", type=int, help="random instances for oracle-compare")
    p.add_argument("--oracle-cap", type=int, help="largest trajectory enumeration allowed")
    p.add_argument("--bench-events", type=int, help="random events per benchmark point")
    p.add_argument("--bench-ceiling", type=float, help="seconds per benchmark sweep")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        values.update(load_toml(args.config))
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    try:
        rc = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    rc.validate()
    return rc


def worker_count() -> int:
    env = os.environ.get("PRISTE_THREADS")
    n = os.cpu_count() or 1
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            raise ConfigError("PRISTE_THREADS must be an integer") from None
    return n


# --------------------------------------------------------------------------
# shared loading


def _transition(rc: RunConfig) -> np.ndarray:
    M = load_transition_csv(rc.transition) if rc.transition else gaussian_transition(rc.grid, rc.sigma)
    if M.shape[-1] != rc.grid.m:
        raise ConfigError(f"transition matrix has {M.shape[-1]} states but the map has {rc.grid.m} cells")
    return M


def _events(rc: RunConfig) -> list[Event]:
    if rc.events:
        return load_events(rc.events, rc.grid.m)
    return standard_events(_experiment_config(rc, GEOIND))


def _trajectory(rc: RunConfig) -> np.ndarray | None:
    if not rc.trajectory:
        return None
    box = BoundingBox(*rc.bbox) if rc.bbox else None
    return ingest_csv(rc.trajectory, rc.grid, box).cells


def _experiment_config(rc: RunConfig, algorithm: str) -> ExperimentConfig:
    return ExperimentConfig(width=rc.width, height=rc.height, cell_size=rc.cell_size, sigma=rc.sigma,
                            horizon=rc.horizon, algorithm=algorithm, epsilon=rc.epsilon, alpha=rc.alpha,
                            delta=rc.delta, decay=rc.decay, time_budget=rc.time_budget, runs=rc.runs,
                            seed=rc.seed)


# --------------------------------------------------------------------------
# modes

QUANTIFY_HEADER = ["t", "event", "released_cell", "prior", "joint", "likelihood", "leakage_ratio", "status"]


def cmd_quantify(rc: RunConfig) -> int:
    """Per-timestamp leakage ratio of a released trace under a fixed prior."""
    grid = rc.grid
    m = grid.m
    M = _transition(rc)
    events = _events(rc)
    pi = np.full(m, 1.0 / m) if rc.pi == "uniform" else validate_distribution(
        np.loadtxt(rc.pi, delimiter=",", ndmin=1))
    if rc.emission == "plm":
        E = plm_emission_matrix(rc.alpha, grid)
    elif rc.emission == "uniform":
        E = uniform_emission_matrix(m)
    else:
        E = np.loadtxt(rc.emission, delimiter=",", ndmin=2)
        if E.shape != (m, m):
            raise ConfigError(f"emission matrix must be {m}x{m}")
    traj = _trajectory(rc)
    rng = np.random.default_rng(rc.seed)
    if traj is None:
        traj = generate_trajectory(M, pi, rc.horizon, seed=[rc.seed, 0])
    released = [sample_row(E[c], rng.random()) for c in traj]
    cols = E[:, released].T
    out = _out_file(rc.out, "leakage.csv")
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(QUANTIFY_HEADER)
        for ev in events:
            name = ev.name or json.dumps(ev.to_dict())
            prior = prior_probability(pi, ev, M)
            for t in range(1, len(traj) + 1):
                joint, total, log_scale = _log_joint_terms(pi, ev, M, cols[:t])
                scale = math.exp(log_scale)
                try:
                    ratio, status = leakage_ratio(pi, ev, M, cols[:t]), "ok"
                except DegenerateEventError:
                    ratio, status = float("nan"), "degenerate"
                w.writerow([t, name, released[t - 1], repr(prior), repr(joint * scale), repr(total * scale),
                            repr(ratio), status])
            if not 0 < prior < 1:
                print(f"event {name}: Pr(Event) = {prior}, ratio undefined", file=sys.stderr)
    print(f"wrote {out}")
    return 0


def cmd_release(rc: RunConfig, algorithm: str) -> int:
    """Run the release loop ``runs`` times, write logs and summaries, replay every trace."""
    cfg = _experiment_config(rc, algorithm)
    M = _transition(rc)
    events = _events(rc)
    traj = _trajectory(rc)
    if traj is not None:
        cfg = cfg.with_(horizon=len(traj))
    out = Path(rc.out)
    (out / "logs").mkdir(parents=True, exist_ok=True)
    (out / "released").mkdir(parents=True, exist_ok=True)
    workers = worker_count()

    def progress(k, res):
        log.info("run %d/%d done, mean alpha %.4g", k + 1, cfg.runs, res.final_alpha.mean())

    exp = run_experiment(cfg, events, M=M, trajectory=traj, workers=workers, progress=progress)
    for res in exp.results:
        # attempt counts reveal rejected draws; logs/ is the sensitive channel
        write_run_log(out / "logs" / f"run_{res.seed:05d}.csv", res.records)
        with (out / "released" / f"released_{res.seed:05d}.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "cell"])
            w.writerows((r.t, r.released_cell) for r in res.records)
    summary = summarize(exp.results)
    write_summary(out / "summary.csv", summary)
    failures = []
    for k, rep in exp.replay():
        failures += [{"seed": exp.results[k].seed, "t": t, "event": e, "decision": d} for t, e, d in rep.failures]
    report = {"config": asdict(rc), "events": [e.to_dict() for e in exp.events],
              "runs": len(exp.results), "replay_failures": failures,
              "mean_alpha": float(summary.mean_alpha.mean()), "mean_dist": float(summary.mean_dist.mean())}
    (out / "report.json").write_text(json.dumps(report, indent=2))
    print(f"{algorithm}: {len(exp.results)} runs, mean alpha {report['mean_alpha']:.4g}, "
          f"mean distance {report['mean_dist']:.3f} km, replay failures {len(failures)}")
    return 0 if not failures else 1


ORACLE_HEADER = ["instance", "m", "T", "kind", "start", "end", "quantity", "two_world", "oracle", "abs_diff"]


def cmd_oracle_compare(rc: RunConfig) -> int:
    """Random small instances: two-world prior, joint and ratio against enumeration."""
    from .markov import joint_probability
    rng = np.random.default_rng(rc.seed)
    out = _out_file(rc.out, "oracle_compare.csv")
    worst = 0.0
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ORACLE_HEADER)
        for i in range(rc.instances):
            m = int(rng.integers(2, 5))
            T = int(rng.integers(1, 7))
            M = rng.dirichlet(np.ones(m), size=m)
            pi = rng.dirichlet(np.ones(m))
            start = int(rng.integers(1, T + 1))
            end = int(rng.integers(start, T + 1))
            kind = EventKind.PRESENCE if rng.random() < 0.5 else EventKind.PATTERN
            regions = tuple(Region.from_cells(rng.choice(m, size=int(rng.integers(1, m + 1)), replace=False), m)
                            for _ in range(end - start + 1))
            ev = Event(kind, regions, tuple(range(start, end + 1)))
            E = rng.dirichlet(np.ones(m), size=m)
            cols = E[:, rng.integers(m, size=T)].T
            rows = [("prior", prior_probability(pi, ev, M), oracle.naive_prior(pi, M, ev, rc.oracle_cap)),
                    ("joint", joint_probability(pi, ev, M, cols),
                     oracle.naive_joint(pi, M, ev, cols, rc.oracle_cap))]
            for q, a, b in rows:
                worst = max(worst, abs(a - b))
                w.writerow([i, m, T, kind.value, start, end, q, repr(a), repr(b), repr(abs(a - b))])
    ok = worst <= 1e-9
    print(f"{rc.instances} instances, largest absolute difference {worst:.3g} ({'ok' if ok else 'FAIL'})")
    return 0 if ok else 1


def cmd_bench(rc: RunConfig) -> int:
    cfg = BenchConfig(events_per_point=rc.bench_events, ceiling=rc.bench_ceiling, seed=rc.seed)
    largest = max(max(cfg.length_width ** L for L in cfg.lengths), max(w ** cfg.width_length for w in cfg.widths))
    if largest > rc.oracle_cap:
        raise ConfigError(f"benchmark enumerates up to {largest} trajectories; raise --oracle-cap")
    say = (lambda s: print(s, file=sys.stderr))
    points = length_sweep(cfg, say) + width_sweep(cfg, say) + checker_path_sweep(cfg, say)
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    write_bench_csv(out / "bench.csv", points)
    with (out / "bench_fit.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sweep", "method", "model", "slope", "r2"])
        for sweep in ("length", "width", "map_size"):
            for method in ("oracle", "two_world", "checker"):
                pts = [p for p in points if p.sweep == sweep and p.method == method]
                if len(pts) < 2:
                    continue
                xs, ys = [p.x for p in pts], [p.mean for p in pts]
                for model, fit in (("loglinear", loglinear_fit), ("loglog", loglog_fit)):
                    _, b, r2 = fit(xs, ys)
                    w.writerow([sweep, method, model, repr(b), repr(r2)])
    print(f"wrote {out / 'bench.csv'} and {out / 'bench_fit.csv'}")
    return 0


def _out_file(out: str, default_name: str) -> Path:
    p = Path(out)
    if p.suffix.lower() == ".csv":
        p.parent.mkdir(parents=True, exist_ok=True)
        return p
    p.mkdir(parents=True, exist_ok=True)
    return p / default_name


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = resolve_config(args)
        if rc.mode == "quantify":
            return cmd_quantify(rc)
        if rc.mode == "release-geoind":
            return cmd_release(rc, GEOIND)
        if rc.mode == "release-deltaloc":
            return cmd_release(rc, DELTALOC)
        if rc.mode == "oracle-compare":
            return cmd_oracle_compare(rc)
        return cmd_bench(rc)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"priste: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
