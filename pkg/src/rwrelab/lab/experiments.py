"""Experiment implementations: scaling-exponent measurements, estimator
pipelines, distributional diagnostics, and tail samplers.

All functions are pure in (model, sizes, master_seed): randomness is derived
from per-task keys, and reductions run in a fixed order, so results are
bitwise reproducible at any thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..env import EnvironmentModel
from ..hashing import MASK64, TAG_ENV_SEED, TAG_EXPERIMENT, TAG_WALK, key64
from ..pair import (
    PairRegenSampler,
    common_regen_pairs,
    coupled_sample,
    visited_intersection_count,
)
from ..regen import DegeneracyReport, degeneracy_check, detect_regenerations, slabs
from ..stats import (
    FitResult,
    InsufficientDataError,
    degenerate_fit,
    fit_loglog,
    ks_gaussian,
    ols_line,
)
from ..walk import RngStream, WalkerBatch, make_path, simulate_batch
from .parallel import parallel_map, split_indices


def _env_seed(master_seed: int, i: int) -> int:
    return key64(master_seed, TAG_ENV_SEED, i) & MASK64


def _walk_key(master_seed: int, *ids: int) -> int:
    return key64(master_seed, TAG_WALK, *ids) & MASK64


# ---------------------------------------------------------------------------
# Slab-based estimation (velocity, diffusion matrix, regeneration tails)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimateResult:
    v_hat: np.ndarray
    v_se: np.ndarray
    d_hat: np.ndarray
    d_se: np.ndarray
    slab_count: int
    censor_rate: float
    degeneracy: DegeneracyReport
    tau1_sample: np.ndarray          # first regeneration time of each path
    slab_rows: list[tuple]           # capped sample of (replica, k, duration, dx...)

    def summary(self) -> dict:
        return {
            "v_hat": self.v_hat.tolist(),
            "v_se": self.v_se.tolist(),
            "d_hat": self.d_hat.tolist(),
            "d_se": self.d_se.tolist(),
            "slab_count": self.slab_count,
            "censor_rate": self.censor_rate,
            "degeneracy": self.degeneracy.summary(),
        }


def estimate_model(
    model: EnvironmentModel,
    master_seed: int,
    n_paths: int = 64,
    n_steps: int = 65536,
    a: int = 1,
    confirm: int = 512,
    threads: int = 1,
    max_slab_rows: int = 2000,
) -> EstimateResult:
    """Simulate independent long walks in fresh environments, detect their
    regenerations, and aggregate slab moments into velocity and diffusion
    estimates.  Paths double as batches for the standard errors."""
    d = model.d

    def run_group(group: range):
        rows = []
        moments = []
        taus = []
        censored = 0
        for i in group:
            hist = simulate_batch(
                model,
                np.uint64(_env_seed(master_seed, i)),
                np.uint64(_walk_key(master_seed, i)),
                np.zeros((1, d), dtype=np.int64),
                n_steps,
            )[0]
            path = make_path(hist, model.u_hat)
            rec = detect_regenerations(path, a=a, confirm_horizon=confirm)
            censored += int(rec.censored_tail)
            if rec.times.shape[0]:
                taus.append(int(rec.times[0]))
            sl = slabs(path, rec)
            dur = np.asarray([s.duration for s in sl if s.index >= 1], dtype=np.float64)
            disp = np.asarray([s.displacement for s in sl if s.index >= 1], dtype=np.float64)
            if dur.shape[0] == 0:
                continue
            moments.append(
                (
                    dur.sum(),
                    disp.sum(axis=0),
                    disp.T @ disp,
                    (dur[:, None] * disp).sum(axis=0),
                    float((dur**2).sum()),
                    dur.shape[0],
                )
            )
            for s in sl[: max(0, max_slab_rows - len(rows))]:
                rows.append((i, s.index, s.duration, *s.displacement))
        return rows, moments, taus, censored

    groups = split_indices(n_paths, max(threads, min(8, n_paths)))
    parts = parallel_map(run_group, groups, threads)

    slab_rows: list[tuple] = []
    moments = []
    taus: list[int] = []
    censored = 0
    for rows, mom, ts, cen in parts:
        slab_rows.extend(rows[: max(0, 2000 - len(slab_rows))])
        moments.extend(mom)
        taus.extend(ts)
        censored += cen
    if len(moments) < 2:
        raise InsufficientDataError("too few paths produced usable slabs")

    sum_t = np.asarray([m[0] for m in moments])
    sum_x = np.stack([m[1] for m in moments])
    sum_xx = np.stack([m[2] for m in moments])
    sum_tx = np.stack([m[3] for m in moments])
    sum_t2 = np.asarray([m[4] for m in moments])
    counts = np.asarray([m[5] for m in moments])

    v_hat = sum_x.sum(axis=0) / sum_t.sum()
    v_b = sum_x / sum_t[:, None]
    v_se = v_b.std(axis=0, ddof=1) / math.sqrt(v_b.shape[0])

    def d_from(mxx, mtx, mt2, mt):
        top = (
            mxx
            - np.outer(v_hat, mtx)
            - np.outer(mtx, v_hat)
            + mt2 * np.outer(v_hat, v_hat)
        )
        return 0.5 * (top + top.T) / mt

    d_hat = d_from(sum_xx.sum(0), sum_tx.sum(0), sum_t2.sum(), sum_t.sum())
    d_b = np.stack(
        [d_from(sum_xx[i], sum_tx[i], sum_t2[i], sum_t[i]) for i in range(len(moments))]
    )
    d_se = d_b.std(axis=0, ddof=1) / math.sqrt(d_b.shape[0])

    return EstimateResult(
        v_hat=v_hat,
        v_se=v_se,
        d_hat=d_hat,
        d_se=d_se,
        slab_count=int(counts.sum()),
        censor_rate=censored / n_paths,
        degeneracy=degeneracy_check(model, d_hat),
        tau1_sample=np.asarray(taus, dtype=np.int64),
        slab_rows=slab_rows,
    )


def tau1_samples(
    model: EnvironmentModel,
    n_samples: int,
    master_seed: int,
    confirm: int = 512,
    threads: int = 1,
    max_horizon: int = 1 << 16,
) -> np.ndarray:
    """First confirmed regeneration time of n_samples walks, each in a fresh
    environment; the horizon grows until every sample is confirmed."""

    def run_group(group: range):
        idx = np.asarray(list(group), dtype=np.int64)
        env = np.asarray([_env_seed(master_seed, int(i)) for i in idx], dtype=np.uint64)
        keys = np.asarray([_walk_key(master_seed, int(i)) for i in idx], dtype=np.uint64)
        batch = WalkerBatch(model, env, keys, np.zeros((idx.size, model.d), np.int64),
                            record="levels")
        out = np.full(idx.size, -1, dtype=np.int64)
        pending = np.arange(idx.size)
        horizon = confirm + 128
        while pending.size:
            if batch.t >= max_horizon:
                raise RuntimeError("first regeneration unresolved within the horizon cap")
            batch.step(horizon - batch.t)
            still = []
            for j in pending:
                rec = detect_regenerations(
                    make_path_levels(batch.walker_levels(j), model),
                    a=1, confirm_horizon=confirm,
                )
                if rec.times.shape[0]:
                    out[j] = rec.times[0]
                else:
                    still.append(j)
            pending = np.asarray(still, dtype=np.int64)
            horizon *= 2
        return out

    groups = split_indices(n_samples, max(threads, (n_samples + 2047) // 2048))
    return np.concatenate(parallel_map(run_group, groups, threads))


def make_path_levels(levels: np.ndarray, model: EnvironmentModel):
    """Levels-only stand-in accepted by the detection routines."""
    from ..walk import Path

    lv = np.ascontiguousarray(levels, dtype=np.int64)
    pos = lv[:, None] * 0  # detection never reads positions
    return Path((0,), pos, lv, model.u_hat)


def mu_samples(
    model: EnvironmentModel,
    n_samples: int,
    master_seed: int,
    confirm: int = 512,
    threads: int = 1,
    max_horizon: int = 1 << 16,
) -> np.ndarray:
    """max of the first common regeneration pair for two walks from the
    origin in a fresh shared environment (unconditioned)."""

    def run_group(group: range):
        idx = list(group)
        A = len(idx)
        env = np.empty(2 * A, dtype=np.uint64)
        keys = np.empty(2 * A, dtype=np.uint64)
        for j, i in enumerate(idx):
            e = _env_seed(master_seed, i)
            env[2 * j] = env[2 * j + 1] = np.uint64(e)
            keys[2 * j] = np.uint64(_walk_key(master_seed, i, 0))
            keys[2 * j + 1] = np.uint64(_walk_key(master_seed, i, 1))
        batch = WalkerBatch(model, env, keys, np.zeros((2 * A, model.d), np.int64),
                            record="levels")
        out = np.full(A, -1, dtype=np.int64)
        pending = list(range(A))
        horizon = confirm + 128
        while pending:
            if batch.t >= max_horizon:
                raise RuntimeError("common regeneration unresolved within the horizon cap")
            batch.step(horizon - batch.t)
            still = []
            for j in pending:
                found, _ = common_regen_pairs(
                    batch.walker_levels(2 * j), batch.walker_levels(2 * j + 1),
                    confirm, first_only=True,
                )
                if found:
                    out[j] = max(found[0])
                else:
                    still.append(j)
            pending = still
            horizon *= 2
        return out

    groups = split_indices(n_samples, max(threads, (n_samples + 1023) // 1024))
    return np.concatenate(parallel_map(run_group, groups, threads))


# ---------------------------------------------------------------------------
# Quenched mean variance (the subdiffusivity experiment)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarianceResult:
    n_grid: tuple[int, ...]
    v_hat: tuple[float, ...]      # cross-half covariance estimate per n
    se: tuple[float, ...]
    fit: FitResult
    n_env: int
    walks_per_env: int

    def summary(self) -> dict:
        return {
            "n_grid": list(self.n_grid),
            "variance": list(self.v_hat),
            "se": list(self.se),
            "fit": self.fit.summary(),
            "environments": self.n_env,
            "walks_per_env": self.walks_per_env,
        }


def quenched_mean_variance(
    model: EnvironmentModel,
    n_grid: list[int],
    n_env: int,
    walks_per_env: int,
    master_seed: int,
    threads: int = 1,
    rao_blackwell: bool = True,
) -> VarianceResult:
    """Estimate Var over environments of the quenched mean position.

    Within each environment the walks are split in halves with means A and
    B; the cross-environment covariance of (A, B), summed over coordinates,
    is an unbiased estimate of the quenched-mean variance, free of the
    within-environment Monte Carlo noise that a naive variance of A would
    add.  Fits log variance against log n.

    With rao_blackwell=True (default) each walk contributes its accumulated
    local drift instead of its endpoint; the quenched mean is unchanged but
    the per-walk noise drops by orders of magnitude, which the stated
    environment/walk budgets need in order to resolve the exponent.
    """
    if walks_per_env < 4 or walks_per_env % 2:
        raise ValueError("walks_per_env must be even and >= 4")
    d = model.d
    grid = sorted(int(n) for n in n_grid)

    def run_envs(group: range):
        idx = list(group)
        B = len(idx) * walks_per_env
        env = np.empty(B, dtype=np.uint64)
        keys = np.empty(B, dtype=np.uint64)
        for j, i in enumerate(idx):
            e = _env_seed(master_seed, i)
            for w in range(walks_per_env):
                env[j * walks_per_env + w] = np.uint64(e)
                keys[j * walks_per_env + w] = np.uint64(_walk_key(master_seed, i, w))
        ckpt = simulate_batch(model, env, keys, np.zeros((B, d), np.int64),
                              grid[-1], checkpoints=grid,
                              checkpoint_drift=rao_blackwell)
        half = walks_per_env // 2
        a_means = np.empty((len(grid), len(idx), d))
        b_means = np.empty((len(grid), len(idx), d))
        for gi, n in enumerate(grid):
            pos = ckpt[n].reshape(len(idx), walks_per_env, d).astype(np.float64)
            a_means[gi] = pos[:, :half].mean(axis=1)
            b_means[gi] = pos[:, half:].mean(axis=1)
        return a_means, b_means

    groups = split_indices(n_env, max(threads, (n_env + 31) // 32))
    parts = parallel_map(run_envs, groups, threads)
    a_all = np.concatenate([p[0] for p in parts], axis=1)
    b_all = np.concatenate([p[1] for p in parts], axis=1)

    vhats, ses = [], []
    for gi in range(len(grid)):
        a = a_all[gi] - a_all[gi].mean(axis=0)
        b = b_all[gi] - b_all[gi].mean(axis=0)
        u = (a * b).sum(axis=1)  # per-env cross product, summed over coords
        e = u.shape[0]
        vhats.append(float(u.sum() / (e - 1)))
        ses.append(float(u.std(ddof=1) * math.sqrt(e) / (e - 1)))
    xs = np.asarray(grid, dtype=np.float64)
    ys = np.asarray(vhats)
    ok = ys > 0
    if int(ok.sum()) >= 4:
        fit = fit_loglog(xs[ok], ys[ok])
    else:
        fit = degenerate_fit(int(ok.sum()))
    return VarianceResult(
        tuple(grid),
        tuple(max(v, 0.0) for v in vhats),
        tuple(ses),
        fit,
        n_env,
        walks_per_env,
    )


def synthetic_ballistic_variance(
    n_grid: list[int],
    n_env: int = 200,
    walks_per_env: int = 64,
    master_seed: int = 1,
    noise: float = 1.0,
) -> VarianceResult:
    """Control with a known exponent: per environment the quenched mean is
    n * W * e1 with W uniform, so the variance grows exactly like n^2.
    Per-walk noise exercises the cross-half debiasing."""
    grid = sorted(int(n) for n in n_grid)
    rng = np.random.default_rng(master_seed)
    w = rng.random(n_env)
    vhats, ses = [], []
    for n in grid:
        half = walks_per_env // 2
        noise_a = rng.normal(0, noise, size=(n_env, half)).mean(axis=1)
        noise_b = rng.normal(0, noise, size=(n_env, half)).mean(axis=1)
        a = n * w + noise_a
        b = n * w + noise_b
        ac = a - a.mean()
        bc = b - b.mean()
        u = ac * bc
        vhats.append(float(u.sum() / (n_env - 1)))
        ses.append(float(u.std(ddof=1) * math.sqrt(n_env) / (n_env - 1)))
    fit = fit_loglog(np.asarray(grid, float), np.asarray(vhats))
    return VarianceResult(tuple(grid), tuple(vhats), tuple(ses), fit, n_env, walks_per_env)


# ---------------------------------------------------------------------------
# Intersection experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntersectionResult:
    n_grid: tuple[int, ...]
    means: tuple[float, ...]
    se: tuple[float, ...]
    fit: FitResult
    replicas: int
    rows: list[tuple]  # (replica, n, count)

    def summary(self) -> dict:
        return {
            "n_grid": list(self.n_grid),
            "mean_intersections": list(self.means),
            "se": list(self.se),
            "fit": self.fit.summary(),
            "replicas": self.replicas,
        }


def intersection_experiment(
    model: EnvironmentModel,
    n_grid: list[int],
    replicas: int,
    master_seed: int,
    threads: int = 1,
) -> IntersectionResult:
    """Mean number of common sites of two independent walks from the origin
    in a shared environment, at each horizon in n_grid, with a log-log fit."""
    grid = sorted(int(n) for n in n_grid)
    n_max = grid[-1]
    d = model.d

    def run_group(group: range):
        idx = list(group)
        A = len(idx)
        env = np.empty(2 * A, dtype=np.uint64)
        keys = np.empty(2 * A, dtype=np.uint64)
        for j, i in enumerate(idx):
            e = _env_seed(master_seed, i)
            env[2 * j] = env[2 * j + 1] = np.uint64(e)
            keys[2 * j] = np.uint64(_walk_key(master_seed, i, 0))
            keys[2 * j + 1] = np.uint64(_walk_key(master_seed, i, 1))
        hist = simulate_batch(model, env, keys, np.zeros((2 * A, d), np.int64), n_max - 1)
        counts = np.zeros((A, len(grid)), dtype=np.int64)
        for j in range(A):
            for gi, n in enumerate(grid):
                counts[j, gi] = visited_intersection_count(
                    hist[2 * j][:n], hist[2 * j + 1][:n]
                )
        return counts

    groups = split_indices(replicas, max(threads, (replicas + 63) // 64))
    counts = np.concatenate(parallel_map(run_group, groups, threads), axis=0)
    means = counts.mean(axis=0)
    se = counts.std(axis=0, ddof=1) / math.sqrt(replicas)
    xs = np.asarray(grid, dtype=np.float64)
    ok = means > 0
    fit = fit_loglog(xs[ok], means[ok]) if int(ok.sum()) >= 4 else degenerate_fit(int(ok.sum()))
    rows = [
        (int(i), int(grid[gi]), int(counts[i, gi]))
        for i in range(replicas)
        for gi in range(len(grid))
    ]
    return IntersectionResult(
        tuple(grid),
        tuple(float(v) for v in means),
        tuple(float(v) for v in se),
        fit,
        replicas,
        rows,
    )


# ---------------------------------------------------------------------------
# Quenched CLT diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CltDirection:
    direction: tuple[float, ...]
    kind: str              # "coordinate" | "degenerate"
    variance_target: float
    ks_stat: float | None
    p_value: float | None
    empirical_var: float


@dataclass(frozen=True)
class CltResult:
    env_seed: int
    n: int
    walks: int
    directions: tuple[CltDirection, ...]
    sample_e1: np.ndarray  # first-coordinate scaled endpoints, for plots

    def summary(self) -> dict:
        return {
            "env_seed": self.env_seed,
            "n": self.n,
            "walks": self.walks,
            "directions": [
                {
                    "direction": list(di.direction),
                    "kind": di.kind,
                    "variance_target": di.variance_target,
                    "ks_stat": di.ks_stat,
                    "p_value": di.p_value,
                    "empirical_var": di.empirical_var,
                }
                for di in self.directions
            ],
        }


def clt_experiment(
    model: EnvironmentModel,
    env_seed: int,
    n: int,
    walks: int,
    v_hat: np.ndarray,
    d_hat: np.ndarray,
    master_seed: int,
) -> CltResult:
    """Fix one environment, simulate many walks, and compare the centered,
    diffusively scaled endpoints against centered Gaussians with variances
    from the estimated diffusion matrix; directions in the degenerate
    complement are tested for variance collapse instead."""
    d = model.d
    e = np.uint64(_env_seed(master_seed, env_seed))
    keys = np.asarray(
        [_walk_key(master_seed, env_seed, w) for w in range(walks)], dtype=np.uint64
    )
    ckpt = simulate_batch(model, np.full(walks, e, np.uint64), keys,
                          np.zeros((walks, d), np.int64), n, checkpoints=[n])
    b_n = (ckpt[n].astype(np.float64) - n * np.asarray(v_hat)) / math.sqrt(n)

    deg = degeneracy_check(model, d_hat)
    dirs: list[CltDirection] = []
    for i in range(d):
        u = np.zeros(d)
        u[i] = 1.0
        var = float(u @ d_hat @ u)
        proj = b_n @ u
        stat, pval = ks_gaussian(proj, var)
        dirs.append(CltDirection(tuple(float(c) for c in u), "coordinate", var,
                                 stat, pval, float(proj.var(ddof=1))))
    for u in deg.orthogonal_dirs:
        proj = b_n @ u
        dirs.append(CltDirection(tuple(float(c) for c in u), "degenerate",
                                 float(u @ d_hat @ u), None, None,
                                 float(proj.var(ddof=1))))
    return CltResult(env_seed, n, walks, tuple(dirs), b_n[:, 0].copy())


# ---------------------------------------------------------------------------
# Coupling decay experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CouplingPoint:
    offset_norm: float
    samples: int
    disagreements: int
    mechanism_violations: int

    @property
    def p_hat(self) -> float:
        return self.disagreements / self.samples


@dataclass(frozen=True)
class CouplingResult:
    points: tuple[CouplingPoint, ...]
    fit: FitResult  # log p_hat against |x| (positive-count points)

    def summary(self) -> dict:
        return {
            "points": [
                {
                    "offset_norm": p.offset_norm,
                    "samples": p.samples,
                    "disagreements": p.disagreements,
                    "p_hat": p.p_hat,
                    "mechanism_violations": p.mechanism_violations,
                }
                for p in self.points
            ],
            "fit": self.fit.summary(),
        }


def hyperplane_direction(u_hat: tuple[int, ...]) -> np.ndarray:
    """A primitive integer vector orthogonal to u_hat (a generator of the
    zero-level sublattice along one axis pair)."""
    d = len(u_hat)
    for i in range(d):
        for j in range(d):
            if i != j and u_hat[j] != 0:
                w = np.zeros(d, dtype=np.int64)
                w[i] = u_hat[j]
                w[j] = -u_hat[i]
                g = int(np.gcd.reduce(np.abs(w[w != 0])))
                return w // g
    raise ValueError("u_hat must be nonzero")


def coupling_experiment(
    model: EnvironmentModel,
    offsets: list[int],
    samples: int | list[int],
    master_seed: int,
    confirm: int = 256,
    threads: int = 1,
) -> CouplingResult:
    """Estimate the disagreement probability of the coupled transition pair
    at starting separations |x| from `offsets`, checking on every
    disagreement that the underlying paths really intersected.

    samples may be one budget for all offsets or a per-offset list (larger
    separations disagree exponentially rarely and need more draws)."""
    w = hyperplane_direction(model.u_hat)
    wnorm = float(np.linalg.norm(w))
    if isinstance(samples, int):
        budgets = {k: samples for k in offsets}
    else:
        budgets = dict(zip(sorted(offsets), [int(s) for s in samples]))

    def run_one(task):
        k, idx = task
        x = (k * w).tolist()
        rng = RngStream(key64(master_seed, TAG_EXPERIMENT, k, idx))
        cs = coupled_sample(model, x, rng, confirm=confirm)
        bad = 0
        if not cs.agree:
            seen_divergence = False
            horizon = max(cs.m_index, cs.mbar_index)
            for rep in cs.replicates[:horizon]:
                if rep.diverged_at is None:
                    continue
                window = max(rep.mu_pair[1], rep.rho_pair[1])
                if rep.diverged_at <= window:
                    seen_divergence = True
                    if not rep.paths_intersect:
                        bad += 1
            if not seen_divergence:
                bad += 1
        return int(not cs.agree), bad

    points = []
    all_norms = []
    all_phat = []
    for k in sorted(offsets):
        n_k = budgets[k]
        tasks = [(k, i) for i in range(n_k)]
        res = parallel_map(run_one, tasks, threads)
        dis = sum(r[0] for r in res)
        bad = sum(r[1] for r in res)
        points.append(CouplingPoint(k * wnorm, n_k, dis, bad))
        if dis > 0:
            all_norms.append(k * wnorm)
            all_phat.append(dis / n_k)
    if len(all_norms) >= 3:
        fit = ols_line(np.asarray(all_norms), np.log(np.asarray(all_phat)))
    else:
        fit = degenerate_fit(len(all_norms))
    return CouplingResult(tuple(points), fit)


# ---------------------------------------------------------------------------
# Difference-chain transition tables and the chain step driver
# ---------------------------------------------------------------------------


def ychain_step_fn(
    model: EnvironmentModel,
    master_seed: int,
    confirm: int = 256,
    shared_env: bool = True,
):
    """Batch step function for chain experiments (box exit, occupation)."""
    sampler = PairRegenSampler(model, master_seed, confirm=confirm, shared_env=shared_env)

    def step(xs: np.ndarray, round_key: int) -> np.ndarray:
        ys, _ = sampler.sample_batch(xs, round_key)
        return ys

    return step


def transition_samples(
    model: EnvironmentModel,
    x: list[int],
    n_samples: int,
    master_seed: int,
    confirm: int = 256,
    shared_env: bool = True,
    batch: int = 1024,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Samples of one difference-chain transition from x: (ys, attempts)."""
    sampler = PairRegenSampler(model, master_seed, confirm=confirm, shared_env=shared_env)
    xs0 = np.asarray(x, dtype=np.int64)

    def run_chunk(ci: int):
        size = min(batch, n_samples - ci * batch)
        xs = np.tile(xs0, (size, 1))
        return sampler.sample_batch(xs, round_key=ci)

    chunks = (n_samples + batch - 1) // batch
    parts = parallel_map(run_chunk, list(range(chunks)), threads)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def transition_counts(
    model: EnvironmentModel,
    x: list[int],
    n_samples: int,
    master_seed: int,
    confirm: int = 256,
    shared_env: bool = True,
    batch: int = 1024,
    threads: int = 1,
) -> dict[tuple[int, ...], int]:
    """Empirical law of one difference-chain transition from x."""
    ys, _ = transition_samples(model, x, n_samples, master_seed, confirm,
                               shared_env, batch, threads)
    counts: dict[tuple[int, ...], int] = {}
    for row in ys:
        key = tuple(int(c) for c in row)
        counts[key] = counts.get(key, 0) + 1
    return counts
