"""Artifact writers: delimited tables, JSON summaries, and rendered figures.

Outputs are bitwise deterministic for a fixed (config, seed): no timestamps,
stable float formatting (repr round-trips), sorted JSON keys.  Every file
embeds the schema version, git hash, config hash, and master seed.
"""

from __future__ import annotations

import json
import subprocess
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SCHEMA_VERSION = 1


def git_hash() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True, text=True, timeout=10, cwd=Path(__file__).parent,
        )
        return out.stdout.strip() or "unknown"
    except OSError:
        return "unknown"


def run_metadata(experiment: str, config_hash: str, master_seed: int) -> dict:
    from .. import __version__

    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": experiment,
        "package_version": __version__,
        "git_hash": git_hash(),
        "config_hash": config_hash,
        "master_seed": master_seed,
    }


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], meta: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for k in sorted(meta):
            fh.write(f"# {k}: {meta[k]}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and obj != obj:  # NaN: JSON-safe sentinel
        return "nan"
    return obj


def write_json(path: Path, obj: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Figures (rendered next to the tables they visualize)
# ---------------------------------------------------------------------------


def fig_loglog(path: Path, xs, ys, fit, xlabel: str, ylabel: str, title: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ok = ys > 0
    ax.loglog(xs[ok], ys[ok], "o", ms=5, label="measured")
    if fit is not None and not fit.degenerate:
        grid = np.geomspace(xs[ok].min(), xs[ok].max(), 64)
        ax.loglog(grid, np.exp(fit.intercept) * grid**fit.slope, "-",
                  label=f"slope {fit.slope:.3f} [{fit.ci_low:.3f}, {fit.ci_high:.3f}]")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_survival(path: Path, samples, fit, xlabel: str, title: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    samples = np.sort(np.asarray(samples, dtype=np.float64))
    n = samples.size
    surv = 1.0 - np.arange(1, n + 1) / n
    fig, ax = plt.subplots(figsize=(5.5, 4))
    keep = surv > 0
    ax.semilogy(samples[keep], surv[keep], drawstyle="steps-post", label="empirical survival")
    if fit is not None and np.isfinite(fit.rate):
        lo, hi = np.quantile(samples, [0.5, 0.99])
        grid = np.linspace(lo, hi, 32)
        ref = np.interp(lo, samples[keep], surv[keep])
        ax.semilogy(grid, ref * np.exp(-fit.rate * (grid - lo)), "--",
                    label=f"rate {fit.rate:.4f} [{fit.ci_low:.4f}, {fit.ci_high:.4f}]")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("P(T > t)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_series(path: Path, xs, series: dict, xlabel: str, ylabel: str, title: str,
               logx: bool = False) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for label, ys in series.items():
        (ax.semilogx if logx else ax.plot)(xs, ys, marker="o", ms=4, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_hist_vs_normal(path: Path, sample, variance: float, title: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    sample = np.asarray(sample, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.hist(sample, bins=60, density=True, alpha=0.6, label="empirical")
    if variance > 0:
        grid = np.linspace(sample.min(), sample.max(), 200)
        ax.plot(grid, np.exp(-grid**2 / (2 * variance)) / np.sqrt(2 * np.pi * variance),
                "-", label=f"N(0, {variance:.4f})")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_green(path: Path, table_values: np.ndarray, r0: int, title: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(table_values, origin="lower",
                   extent=(r0 + 0.5, r0 + 0.5 + table_values.shape[1],
                           r0 + 0.5, r0 + 0.5 + table_values.shape[0]))
    fig.colorbar(im, ax=ax, label="expected visits")
    ax.set_xlabel("t")
    ax.set_ylabel("s")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
