"""Experiment runners: wire configs to computations and write artifacts.

Each runner writes delimited tables, a JSON summary, and rendered figures
into <out_dir>/<experiment>/, and returns (summary dict, check failures).
Check failures are only enforced when the config sets check=True.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ..env import Environment, check_hypotheses, model_to_dict
from ..hashing import TAG_EXPERIMENT, key64
from ..pair import PairRegenSampler, common_regen_pairs, coupled_sample
from ..regen import tail_fit
from ..renewal import (
    OneDimWalk,
    box_exit_experiment,
    halfline_green,
    occupation_experiment,
    simulate_green_counts,
)
from ..stats import empirical_tv
from ..walk import RngStream, WalkerBatch, simulate
from . import experiments as ex
from .config import ConfigError, ExperimentConfig
from . import report
from .parallel import parallel_map, split_indices


class CheckFailure(RuntimeError):
    """An acceptance-style check failed in --check mode."""


def run_experiment(cfg: ExperimentConfig) -> tuple[dict, list[str]]:
    model = cfg.resolve_model()
    hyp = check_hypotheses(model)
    if not hyp.all_pass and not cfg.force and cfg.experiment != "hypotheses":
        raise CheckFailure(
            "model fails hypotheses (use force/--force to run anyway): "
            + "; ".join(hyp.witnesses)
        )
    out = Path(cfg.out_dir) / cfg.experiment
    meta = report.run_metadata(cfg.experiment, cfg.config_hash(), cfg.master_seed)
    meta["model"] = model.name or "inline"
    runner = _RUNNERS[cfg.experiment]
    summary, failures = runner(cfg, model, out, meta)
    summary_full = dict(meta)
    summary_full["model_spec"] = model_to_dict(model)
    summary_full["hypotheses"] = hyp.summary()
    summary_full["results"] = summary
    summary_full["check_failures"] = failures
    report.write_json(out / "summary.json", summary_full)
    return summary_full, failures


# ---------------------------------------------------------------------------


def _run_hypotheses(cfg, model, out, meta):
    rep = check_hypotheses(model)
    failures = [] if rep.all_pass else [f"hypotheses: {w}" for w in rep.witnesses]
    return rep.summary(), failures


def _run_simulate(cfg, model, out, meta):
    env = Environment(model, cfg.master_seed)
    rows = []
    for w in range(min(cfg.walks, 32)):
        path = simulate(env, [0] * model.d, cfg.n_steps, RngStream(cfg.master_seed, walker=w))
        for k in range(len(path) + 1):
            rows.append((w, k, *path.positions[k], path.levels[k]))
    header = ["walk", "k"] + [f"x{i+1}" for i in range(model.d)] + ["level"]
    report.write_csv(out / "paths.csv", header, rows, meta)
    lv = {}
    env0 = Environment(model, cfg.master_seed)
    for w in range(min(cfg.walks, 8)):
        p = simulate(env0, [0] * model.d, cfg.n_steps, RngStream(cfg.master_seed, walker=w))
        lv[f"walk {w}"] = p.levels
    report.fig_series(out / "levels.png", list(range(cfg.n_steps + 1)), lv,
                      "step", "level", "walk levels in one environment")
    return {"walks": min(cfg.walks, 32), "n_steps": cfg.n_steps}, []


def _estimate(cfg, model, n_paths=None, n_steps=None):
    return ex.estimate_model(
        model,
        cfg.master_seed,
        n_paths=n_paths or min(cfg.replicas, 64),
        n_steps=n_steps or max(cfg.n_steps, 4096),
        a=cfg.a,
        confirm=cfg.confirm_horizon,
        threads=cfg.threads,
    )


def _run_regen(cfg, model, out, meta):
    est = _estimate(cfg, model)
    header = ["replica", "k", "duration"] + [f"dx{i+1}" for i in range(model.d)]
    report.write_csv(out / "slabs.csv", header, est.slab_rows, meta)
    tail = tail_fit(est.tau1_sample, seed=cfg.master_seed) if est.tau1_sample.size >= 50 else None
    if tail is not None:
        report.fig_survival(out / "tau1_survival.png", est.tau1_sample, tail,
                            "first regeneration time", "regeneration-time tail")
    summary = est.summary()
    summary["tau1_tail"] = tail.summary() if tail else None
    failures = []
    if tail is not None and (tail.degenerate or tail.ci_low <= 0):
        failures.append("regen: regeneration-time tail rate CI does not exclude 0")
    return summary, failures


def _run_estimate(cfg, model, out, meta):
    est = _estimate(cfg, model)
    summary = est.summary()
    failures = []
    eigs = np.linalg.eigvalsh(est.d_hat)
    if eigs.min() < -1e-9 * max(1.0, np.trace(est.d_hat)):
        failures.append(f"estimate: diffusion matrix not PSD within tolerance: {eigs}")
    return summary, failures


def _run_pair(cfg, model, out, meta):
    rows, gamma_tail, mu_tail = pair_level_table(
        model, cfg.replicas, cfg.master_seed, cfg.confirm_horizon, cfg.threads
    )
    header = ["replica", "first_common_level", "gamma", "gamma_tilde", "mu1", "mu1_tilde"]
    report.write_csv(out / "pairs.csv", header, rows, meta)
    mu_max = np.asarray([max(r[4], r[5]) for r in rows])
    fit = tail_fit(mu_max, seed=cfg.master_seed) if mu_max.size >= 50 else None
    if fit is not None:
        report.fig_survival(out / "mu_survival.png", mu_max, fit,
                            "first common regeneration time", "common-regeneration tail")
    summary = {
        "replicas": cfg.replicas,
        "gamma_tail": gamma_tail.summary() if gamma_tail else None,
        "mu_tail": fit.summary() if fit else None,
    }
    failures = []
    if fit is not None and (fit.degenerate or fit.ci_low <= 0):
        failures.append("pair: common-regeneration tail rate CI does not exclude 0")
    return summary, failures


def pair_level_table(model, replicas, master_seed, confirm, threads, offset: int = 0):
    """Per-replica first common level, its hitting times, and the first
    common regeneration pair, for two walks in a shared fresh environment;
    the second walk starts `offset` sublattice units away on the same level."""
    d = model.d
    w = ex.hyperplane_direction(model.u_hat)

    def run_group(group: range):
        idx = list(group)
        A = len(idx)
        env = np.empty(2 * A, dtype=np.uint64)
        keys = np.empty(2 * A, dtype=np.uint64)
        starts = np.zeros((2 * A, d), np.int64)
        for j, i in enumerate(idx):
            e = ex._env_seed(master_seed, i)
            env[2 * j] = env[2 * j + 1] = np.uint64(e)
            keys[2 * j] = np.uint64(ex._walk_key(master_seed, i, 0))
            keys[2 * j + 1] = np.uint64(ex._walk_key(master_seed, i, 1))
            starts[2 * j + 1] = offset * w
        batch = WalkerBatch(model, env, keys, starts, record="levels")
        out_rows = [None] * A
        pending = list(range(A))
        horizon = confirm + 128
        while pending:
            batch.step(horizon - batch.t)
            still = []
            for j in pending:
                la = batch.walker_levels(2 * j)
                lb = batch.walker_levels(2 * j + 1)
                from ..pair import _first_common_stance

                stance = _first_common_stance(la, lb, 0, 0)
                found, _ = common_regen_pairs(la, lb, confirm, first_only=True)
                if stance is not None and found:
                    out_rows[j] = (idx[j], stance[0], stance[1], stance[2],
                                   found[0][0], found[0][1])
                else:
                    still.append(j)
            pending = still
            horizon *= 2
        return out_rows

    groups = split_indices(replicas, max(threads, (replicas + 1023) // 1024))
    rows = [r for part in parallel_map(run_group, groups, threads) for r in part]
    gammas = np.asarray([max(r[2], r[3]) for r in rows])
    gamma_tail = tail_fit(gammas, seed=master_seed ^ 1) if gammas.size >= 50 else None
    return rows, gamma_tail, None


def _run_ychain(cfg, model, out, meta):
    w = ex.hyperplane_direction(model.u_hat)
    failures: list[str] = []
    header = (["variant"] + [f"x{i+1}" for i in range(model.d)]
              + [f"y{i+1}" for i in range(model.d)] + ["attempts", "agree"])
    if cfg.variant == "coupled":
        res = ex.coupling_experiment(
            model, cfg.offsets, cfg.samples, cfg.master_seed,
            confirm=min(cfg.confirm_horizon, 256), threads=cfg.threads,
        )
        rows = [
            (p.offset_norm, p.samples, p.disagreements, p.p_hat, p.mechanism_violations)
            for p in res.points
        ]
        report.write_csv(out / "coupling.csv",
                         ["offset_norm", "samples", "disagreements", "p_hat", "violations"],
                         rows, meta)
        step_rows = []
        for k in sorted(cfg.offsets)[:1]:
            x = (k * w).tolist()
            for i in range(min(cfg.samples if isinstance(cfg.samples, int) else 200, 200)):
                rng = RngStream(key64(cfg.master_seed, TAG_EXPERIMENT, 99, k, i))
                cs = coupled_sample(model, x, rng,
                                    confirm=min(cfg.confirm_horizon, 256))
                step_rows.append(("coupled", *x, *cs.y1,
                                  max(cs.m_index, cs.mbar_index), int(cs.agree)))
        report.write_csv(out / "steps.csv", header, step_rows, meta)
        xs = [p.offset_norm for p in res.points]
        ys = [max(p.p_hat, 1e-12) for p in res.points]
        report.fig_series(out / "coupling.png", xs, {"P(disagree)": ys},
                          "|x|", "disagreement probability", "coupling decay")
        phats = [p.p_hat for p in res.points]
        if not all(a > b for a, b in zip(phats, phats[1:])):
            failures.append("ychain: disagreement probability not strictly decreasing")
        if res.fit.degenerate or not (res.fit.ci_high < 0):
            failures.append("ychain: coupling decay slope CI does not exclude 0")
        if any(p.mechanism_violations for p in res.points):
            failures.append("ychain: disagreement without path intersection observed")
        return res.summary(), failures

    shared = cfg.variant == "common-env"
    rows = []
    summaries = {}
    for k in cfg.offsets or [0]:
        x = (k * w).tolist()
        ys, attempts = ex.transition_samples(
            model, x, cfg.samples, key64(cfg.master_seed, TAG_EXPERIMENT, k),
            confirm=min(cfg.confirm_horizon, 256), shared_env=shared, threads=cfg.threads,
        )
        for row, att in zip(ys, attempts):
            rows.append((cfg.variant, *x, *[int(c) for c in row], int(att), ""))
        if not shared:
            counts: dict[tuple[int, ...], int] = {}
            for row in ys:
                key = tuple(int(c) for c in row)
                counts[key] = counts.get(key, 0) + 1
            mirror = {tuple(2 * np.asarray(x) - np.asarray(y)): c for y, c in counts.items()}
            summaries[str(k)] = {"tv_vs_reflection": empirical_tv(counts, mirror)}
    report.write_csv(out / "steps.csv", header, rows, meta)
    return {"variant": cfg.variant, "samples": cfg.samples, "symmetry": summaries}, failures


def _run_green(cfg, model, out, meta):
    steps = {int(k): float(v) for k, v in cfg.green_steps.items()}
    walk = OneDimWalk(list(steps), list(steps.values()))
    table = halfline_green(walk, cfg.r0, cfg.window)
    rows = [
        (cfg.r0 + 1 + i, cfg.r0 + 1 + j, table.values[i, j])
        for i in range(cfg.window)
        for j in range(cfg.window)
    ]
    report.write_csv(out / "green.csv", ["s", "t", "g"], rows, meta)
    report.fig_green(out / "green.png", table.values, cfg.r0, "half-line Green function")
    start = cfg.r0 + max(1, cfg.window // 3)
    mc_mean, mc_se = simulate_green_counts(
        walk, cfg.r0, start, cfg.window, n_excursions=5000, seed=cfg.master_seed
    )
    solved = table.values[start - cfg.r0 - 1]
    z = np.abs(mc_mean - solved) / np.maximum(mc_se, 1e-12)
    failures = []
    if float(z.max()) > 4.0:
        failures.append(f"green: Monte Carlo mismatch, max z={z.max():.2f}")
    summary = {
        "r0": cfg.r0,
        "window": cfg.window,
        "ceiling": table.ceiling,
        "mc_start": start,
        "mc_max_z": float(z.max()),
        "symmetric": walk.is_symmetric,
    }
    return summary, failures


def _run_variance(cfg, model, out, meta):
    res = ex.quenched_mean_variance(
        model, cfg.n_grid, cfg.environments, cfg.walks_per_env,
        cfg.master_seed, cfg.threads,
    )
    rows = list(zip(res.n_grid, res.v_hat, res.se))
    report.write_csv(out / "variance.csv", ["n", "variance", "se"], rows, meta)
    report.fig_loglog(out / "variance.png", res.n_grid, res.v_hat, res.fit,
                      "n", "Var of quenched mean", "quenched mean variance")
    failures = []
    if res.fit.degenerate:
        failures.append("variance: no positive variance estimates to fit")
    elif not (res.fit.ci_high < 1.0):
        failures.append(
            f"variance: growth exponent upper CI {res.fit.ci_high:.3f} not below 1"
        )
    return res.summary(), failures


def _run_intersections(cfg, model, out, meta):
    res = ex.intersection_experiment(
        model, cfg.n_grid, cfg.replicas, cfg.master_seed, cfg.threads
    )
    report.write_csv(out / "intersections.csv", ["replica", "n", "count"], res.rows, meta)
    report.fig_loglog(out / "intersections.png", res.n_grid, res.means, res.fit,
                      "n", "mean common sites", "path intersections")
    failures = []
    if res.fit.degenerate:
        failures.append("intersections: degenerate fit (all counts zero?)")
    elif not (res.fit.ci_high < 1.0):
        failures.append(
            f"intersections: growth exponent upper CI {res.fit.ci_high:.3f} not below 1"
        )
    return res.summary(), failures


def _run_clt(cfg, model, out, meta):
    est = _estimate(cfg, model)
    results = []
    failures = []
    for seed in cfg.env_seeds:
        res = ex.clt_experiment(
            model, int(seed), cfg.n_steps, cfg.walks, est.v_hat, est.d_hat, cfg.master_seed
        )
        results.append(res.summary())
        var1 = float(est.d_hat[0, 0])
        report.fig_hist_vs_normal(
            out / f"clt_env{seed}.png", res.sample_e1, var1,
            f"scaled first coordinate, environment {seed}",
        )
        for di in res.directions:
            if di.kind == "coordinate" and di.p_value is not None and di.p_value <= 0.01:
                failures.append(
                    f"clt: env {seed} direction {di.direction} KS p={di.p_value:.4f} <= 0.01"
                )
            if di.kind == "degenerate":
                # collapse check: the projected variance must be 1/n-small
                # next to the matrix scale, not merely smaller
                scale = max(float(np.trace(est.d_hat)), 1e-12)
                if di.empirical_var > 0.05 * scale:
                    failures.append(
                        f"clt: env {seed} degenerate direction {di.direction} "
                        f"variance {di.empirical_var:.4g} did not collapse"
                    )
    summary = {"estimate": est.summary(), "environments": results}
    return summary, failures


def _run_occupation(cfg, model, out, meta):
    step_fn = ex.ychain_step_fn(
        model, key64(cfg.master_seed, TAG_EXPERIMENT, 7),
        confirm=min(cfg.confirm_horizon, 256),
    )
    res = occupation_experiment(
        step_fn, model.d, cfg.decay_rate, cfg.scale, cfg.n_grid, cfg.replicas
    )
    report.write_csv(out / "occupation.csv", ["n", "s_n"],
                     list(zip(res.n_grid, res.sums)), meta)
    report.fig_loglog(out / "occupation.png", res.n_grid, res.sums, res.fit,
                      "n", "occupation sum", "difference-chain occupation growth")
    summary = res.summary()
    failures = []
    if res.fit.degenerate:
        failures.append("occupation: degenerate fit")
    elif not (res.fit.ci_high < 1.0):
        failures.append(
            f"occupation: growth exponent upper CI {res.fit.ci_high:.3f} not below 1"
        )
    if cfg.box_exit_grid:
        rows = []
        for r in cfg.box_exit_grid:
            bx = box_exit_experiment(
                ex.ychain_step_fn(model, key64(cfg.master_seed, TAG_EXPERIMENT, 8, r),
                                  confirm=min(cfg.confirm_horizon, 256)),
                model.d, int(r), [0] * model.d, cfg.replicas, step_cap=cfg.step_cap,
            )
            rows.append((bx.r, bx.mean_steps, bx.q50, bx.q95, bx.cap_hits))
        report.write_csv(out / "box_exit.csv",
                         ["r", "mean_steps", "q50", "q95", "cap_hits"], rows, meta)
        summary["box_exit"] = [
            {"r": r, "mean_steps": m, "q50": q1, "q95": q2, "cap_hits": c}
            for r, m, q1, q2, c in rows
        ]
    return summary, failures


_RUNNERS = {
    "hypotheses": _run_hypotheses,
    "simulate": _run_simulate,
    "regen": _run_regen,
    "estimate": _run_estimate,
    "pair": _run_pair,
    "ychain": _run_ychain,
    "green": _run_green,
    "variance": _run_variance,
    "intersections": _run_intersections,
    "clt": _run_clt,
    "occupation": _run_occupation,
}
