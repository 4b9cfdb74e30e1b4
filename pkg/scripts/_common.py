"""Helpers shared by the experiment scripts: argument parsing, CSV output, optional plotting."""
import argparse
import csv
from pathlib import Path

import numpy as np


def parser(description: str, runs: int = 100) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--runs", type=int, default=runs)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=50)
    p.add_argument("--out", default="results/scripts")
    p.add_argument("--plot", action="store_true", help="also write a PNG (needs matplotlib)")
    return p


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path}")
    return path


def per_timestamp(label, alphas: np.ndarray):
    """Rows (label, t, mean, sd) of a runs x T matrix."""
    sd = alphas.std(0, ddof=1) if alphas.shape[0] > 1 else np.zeros(alphas.shape[1])
    return [(label, t + 1, float(m), float(s)) for t, (m, s) in enumerate(zip(alphas.mean(0), sd))]


def plot_curves(path, curves: dict, ylabel: str, window=None):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not available; skipping plot")
        return
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, y in curves.items():
        ax.plot(np.arange(1, len(y) + 1), y, label=label)
    if window:
        ax.axvspan(window[0], window[1], color="grey", alpha=0.2)
    ax.set_xlabel("timestamp")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    print(f"wrote {path}")
