"""Two walks in one environment: common regeneration levels, the difference
Markov chain of their positions at common regenerations, the comparison
random walk built from independent environments, and the coupling between
the two transition laws.

Construction of the first common regeneration of a pair that starts on a
common level: move both walks to the first fresh common level (a level both
walks enter exactly, without overshoot).  If either walk later dips below
that level, wait until both walks climb strictly above everything either has
visited, find the next fresh common level, and repeat.  The pair time at
which the final common level is reached, after which neither walk ever dips
below it, is the common regeneration.  On finite paths "never" is read as
"not within confirm_horizon observed steps, and never within whatever has
been observed".
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .env import Environment, EnvironmentModel
from .hashing import (
    MASK64,
    TAG_ENV,
    TAG_RETRY,
    TAG_STEP_TABLE,
    TAG_WALK,
    absorb64,
    key64,
    unit_uniform,
)
from .walk import Path, RngStream, WalkerBatch, make_path, path_records, simulate, suffix_min

DEFAULT_CONFIRM = 512
DEFAULT_MAX_ATTEMPTS = 256


class SamplingError(RuntimeError):
    """A rejection sampler exceeded its attempt or horizon budget."""


@dataclass(frozen=True)
class PairPath:
    """Two trajectories driven by one shared environment but independent
    step randomness."""

    path_x: Path
    path_xt: Path


@dataclass(frozen=True)
class PairRegenRecord:
    """Common regeneration time pairs (one time index per walk)."""

    pairs: tuple[tuple[int, int], ...]
    censored_tail: bool
    confirm_horizon: int | None


def simulate_pair(
    env: Environment,
    x: Sequence[int],
    y: Sequence[int],
    n: int,
    rng_x: RngStream,
    rng_xt: RngStream,
) -> PairPath:
    """Two conditionally independent quenched walks in the shared environment."""
    return PairPath(simulate(env, x, n, rng_x), simulate(env, y, n, rng_xt))


def intersections(pairpath: PairPath, n: int) -> int:
    """Number of lattice sites visited by both walks before time n."""
    if len(pairpath.path_x) < n - 1 or len(pairpath.path_xt) < n - 1:
        raise ValueError("both paths need at least n steps")
    return visited_intersection_count(
        pairpath.path_x.positions[:n], pairpath.path_xt.positions[:n]
    )


def _site_view(a: np.ndarray) -> np.ndarray:
    b = np.ascontiguousarray(a)
    return b.view([("", b.dtype)] * b.shape[1]).ravel()


def visited_intersection_count(pos_a: np.ndarray, pos_b: np.ndarray) -> int:
    sa = np.unique(_site_view(pos_a))
    sb = np.unique(_site_view(pos_b))
    return int(np.intersect1d(sa, sb, assume_unique=True).size)


# ---------------------------------------------------------------------------
# Common regeneration construction on stored level sequences
# ---------------------------------------------------------------------------


def _first_common_stance(
    lvx: np.ndarray, lvxt: np.ndarray, ox: int, oxt: int
) -> tuple[int, int, int] | None:
    """First fresh common level of the two suffixes from (ox, oxt).

    A level qualifies when both walks, scanned from their offsets, first meet
    it exactly (no overshoot); those first-crossing times are exactly the
    record times of each suffix, so candidates are common record values above
    min(offset levels).  Returns (level, time_x, time_xt) or None.
    """
    tx, vx = path_records(lvx, ox)
    txt, vxt = path_records(lvxt, oxt)
    thr = min(int(lvx[ox]), int(lvxt[oxt]))
    common = np.intersect1d(vx[vx > thr], vxt[vxt > thr], assume_unique=True)
    if common.size == 0:
        return None
    level = int(common[0])
    sx = int(tx[np.searchsorted(vx, level)])
    sxt = int(txt[np.searchsorted(vxt, level)])
    return level, sx, sxt


def first_common_level(pairpath: PairPath) -> tuple[int, int, int] | None:
    """First fresh common level of the pair with its two hitting indices."""
    return _first_common_stance(pairpath.path_x.levels, pairpath.path_xt.levels, 0, 0)


def common_regen_pairs(
    lvx: np.ndarray,
    lvxt: np.ndarray,
    confirm: int | None,
    first_only: bool = False,
) -> tuple[list[tuple[int, int]], bool]:
    """Common regeneration pairs of two level sequences sharing a start level.

    A pair (s, s~) qualifies when both walks stand on one common level
    strictly above the start, each having reached it as a fresh record
    (strict past), with no later dip below it observed and at least
    confirm_horizon observed steps after (weak future).  Candidate levels are
    therefore the common record values of the two walks; they are scanned in
    increasing order.  Returns (pairs, censored): censored marks a trailing
    dip-free candidate whose confirmation window was cut off by path end.
    """
    nx = lvx.shape[0] - 1
    nxt = lvxt.shape[0] - 1
    if int(lvx[0]) != int(lvxt[0]):
        raise ValueError("common regenerations need a common starting level")
    tx, vx = path_records(lvx)
    txt, vxt = path_records(lvxt)
    sufx = suffix_min(lvx)
    sufxt = suffix_min(lvxt)
    need = 0 if confirm is None else confirm

    def side_flags(t, v, suf, n):
        nodip = np.empty(t.shape, dtype=bool)
        end = t == n
        nodip[end] = True
        inner = ~end
        nodip[inner] = suf[t[inner] + 1] >= v[inner]
        return nodip, (n - t) >= need

    ndx, cfx = side_flags(tx, vx, sufx, nx)
    ndt, cft = side_flags(txt, vxt, sufxt, nxt)
    common, ix, ixt = np.intersect1d(vx, vxt, assume_unique=True, return_indices=True)
    keep = common > int(lvx[0])
    pairs: list[tuple[int, int]] = []
    censored = False
    for i, j in zip(ix[keep], ixt[keep]):
        if not (ndx[i] and ndt[j]):
            continue
        if cfx[i] and cft[j]:
            pairs.append((int(tx[i]), int(txt[j])))
            if first_only:
                break
        else:
            # Later candidates sit later on both paths, so their windows are
            # shorter still: the record is censored from here on.
            censored = True
            break
    return pairs, censored


def common_regenerations(pairpath: PairPath, confirm: int | None = DEFAULT_CONFIRM) -> PairRegenRecord:
    """All common regeneration pairs resolvable within the stored paths.

    Requires both walks to start on one common level.  censored_tail marks a
    trailing candidate cut off by the end of a path before confirmation.
    """
    pairs, censored = common_regen_pairs(
        pairpath.path_x.levels, pairpath.path_xt.levels, confirm
    )
    return PairRegenRecord(tuple(pairs), censored, confirm)


# ---------------------------------------------------------------------------
# Difference-chain transition samplers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class YStep:
    """One sampled transition of the difference chain."""

    start: tuple[int, ...]
    result: tuple[int, ...]
    attempts: int
    variant: str  # "common-env" | "independent-env" | "coupled"


class PairRegenSampler:
    """Vectorized rejection sampler of the first-common-regeneration
    difference for a batch of start offsets.

    Each attempt draws fresh environment seed(s), runs both walks from
    (0, x), rejects if either walk is ever observed below its starting
    level, and otherwise resolves the first common regeneration with a
    confirmation horizon.  shared_env=False gives each walk its own
    environment (the symmetric comparison walk's transition law).
    """

    def __init__(
        self,
        model: EnvironmentModel,
        master_seed: int,
        confirm: int = DEFAULT_CONFIRM,
        shared_env: bool = True,
        chunk: int | None = None,
        max_horizon: int | None = None,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    ):
        self.model = model
        self.master_seed = master_seed
        self.confirm = confirm
        self.shared_env = shared_env
        self.chunk = chunk if chunk is not None else confirm + 128
        self.max_horizon = max_horizon if max_horizon is not None else 16 * (confirm + 128)
        self.max_attempts = max_attempts

    def sample_batch(self, xs: np.ndarray, round_key: int) -> tuple[np.ndarray, np.ndarray]:
        """Sample one transition for each row of xs (all on level 0).

        round_key must differ between calls so attempts draw fresh
        randomness.  Returns (results (R, d), attempts (R,)).
        """
        xs = np.atleast_2d(np.asarray(xs, dtype=np.int64))
        R, d = xs.shape
        if np.any(xs @ self.model.u_array != 0):
            raise ValueError("start offsets must lie on level 0")
        results = np.zeros((R, d), dtype=np.int64)
        attempts = np.zeros(R, dtype=np.int64)
        pending = list(range(R))
        attempt = 0
        while pending:
            attempt += 1
            if attempt > self.max_attempts:
                raise SamplingError(
                    f"no acceptance for {len(pending)} replicas after {self.max_attempts} attempts"
                )
            pending = self._run_attempt(xs, results, attempts, pending, round_key, attempt)
        return results, attempts

    def _run_attempt(
        self,
        xs: np.ndarray,
        results: np.ndarray,
        attempts: np.ndarray,
        pending: list[int],
        round_key: int,
        attempt: int,
    ) -> list[int]:
        A = len(pending)
        d = xs.shape[1]
        starts = np.zeros((2 * A, d), dtype=np.int64)
        env_seeds = np.empty(2 * A, dtype=np.uint64)
        walk_keys = np.empty(2 * A, dtype=np.uint64)
        for j, i in enumerate(pending):
            starts[2 * j + 1] = xs[i]
            base = key64(self.master_seed, TAG_RETRY, round_key, i, attempt)
            e0 = key64(base, 0)
            e1 = e0 if self.shared_env else key64(base, 1)
            env_seeds[2 * j] = np.uint64(e0 & MASK64)
            env_seeds[2 * j + 1] = np.uint64(e1 & MASK64)
            walk_keys[2 * j] = np.uint64(key64(base, TAG_WALK, 0) & MASK64)
            walk_keys[2 * j + 1] = np.uint64(key64(base, TAG_WALK, 1) & MASK64)
            attempts[i] += 1
        batch = WalkerBatch(self.model, env_seeds, walk_keys, starts, record=True)

        still = list(range(A))  # indices into this attempt needing resolution
        rejected: list[int] = []
        while still:
            grow = min(self.chunk, self.max_horizon - batch.t)
            if grow <= 0:
                raise SamplingError(
                    f"common regeneration unresolved within horizon {self.max_horizon}"
                )
            batch.step(grow)
            nxt: list[int] = []
            for j in still:
                la = batch.walker_levels(2 * j)
                lb = batch.walker_levels(2 * j + 1)
                if la.min() < la[0] or lb.min() < lb[0]:
                    rejected.append(j)
                    continue
                found, _ = common_regen_pairs(la, lb, self.confirm, first_only=True)
                if found:
                    sx, sxt = found[0]
                    results[pending[j]] = (
                        batch._pos_hist[sxt, 2 * j + 1] - batch._pos_hist[sx, 2 * j]
                    )
                else:
                    nxt.append(j)
            still = nxt
        return [pending[j] for j in rejected]


def _scalar_sampler(
    model: EnvironmentModel,
    rng: RngStream,
    confirm: int,
    shared_env: bool,
    max_attempts: int,
) -> PairRegenSampler:
    return PairRegenSampler(
        model,
        rng.raw64(),
        confirm=confirm,
        shared_env=shared_env,
        max_attempts=max_attempts,
    )


def y_chain_sample(
    model: EnvironmentModel,
    x: Sequence[int],
    rng: RngStream,
    confirm: int = DEFAULT_CONFIRM,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> YStep:
    """One transition of the difference chain: two walks from (0, x) in one
    fresh shared environment, conditioned on no backtracking by rejection."""
    sampler = _scalar_sampler(model, rng, confirm, True, max_attempts)
    ys, att = sampler.sample_batch(np.asarray([list(x)], dtype=np.int64), round_key=0)
    return YStep(tuple(int(c) for c in x), tuple(int(c) for c in ys[0]), int(att[0]), "common-env")


def ybar_sample(
    model: EnvironmentModel,
    x: Sequence[int],
    rng: RngStream,
    confirm: int = DEFAULT_CONFIRM,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> YStep:
    """Same construction with each walk in its own independent environment:
    one step of the symmetric comparison walk."""
    sampler = _scalar_sampler(model, rng, confirm, False, max_attempts)
    ys, att = sampler.sample_batch(np.asarray([list(x)], dtype=np.int64), round_key=0)
    return YStep(tuple(int(c) for c in x), tuple(int(c) for c in ys[0]), int(att[0]), "independent-env")


# ---------------------------------------------------------------------------
# Three-walk coupling of the two transition laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReplicateDiag:
    """Per-replicate bookkeeping of the coupled construction."""

    backtracked_x: bool
    backtracked_xt: bool
    backtracked_xb: bool
    diverged_at: int | None           # first time the two coupled walks differ
    mu_pair: tuple[int, int] | None   # (X, X-tilde) common regeneration
    rho_pair: tuple[int, int] | None  # (X, X-bar) common regeneration
    paths_intersect: bool             # X and X-tilde share a site within the windows


@dataclass(frozen=True)
class CoupledSample:
    y1: tuple[int, ...]
    ybar1: tuple[int, ...]
    agree: bool
    replicates: tuple[ReplicateDiag, ...]
    m_index: int
    mbar_index: int


class _SiteDistCache:
    """Per-environment cache of site step CDFs for pure-Python stepping.

    The cumulative probabilities reproduce the batched engine's site law
    exactly (same key chain, same blend expression, same accumulation order,
    same tie rule), without touching numpy in the per-site path.
    """

    def __init__(self, model: EnvironmentModel, env_seed: int):
        from .env import FiniteMixture, Homogeneous, TwoPointMixture

        self.model = model
        self.seed = env_seed & MASK64
        self.steps = tuple(tuple(int(c) for c in s) for s in model.union_steps)
        self._cache: dict[tuple[int, ...], list[float]] = {}
        rows = model._component_prob_rows
        fam = model.family
        if isinstance(fam, Homogeneous):
            acc = 0.0
            fixed = []
            for p in rows[0]:
                acc += float(p)
                fixed.append(acc)
            self._mode = "fixed"
            self._fixed = fixed
        elif isinstance(fam, TwoPointMixture):
            self._mode = "blend"
            self._row_b = [float(p) for p in rows[1]]
            self._row_diff = [float(a - b) for a, b in zip(rows[0], rows[1])]
        else:
            self._mode = "pick"
            self._weights_cdf = list(np.cumsum(fam.weights))
            self._comp_cdfs = [list(np.cumsum(r)) for r in rows]

    def cdf(self, site: tuple[int, ...]) -> list[float]:
        c = self._cache.get(site)
        if c is None:
            if self._mode == "fixed":
                c = self._fixed
            else:
                u = unit_uniform(key64(self.seed, TAG_ENV, *site))
                if self._mode == "blend":
                    acc = 0.0
                    c = []
                    for b, dd in zip(self._row_b, self._row_diff):
                        acc += b + u * dd
                        c.append(acc)
                else:
                    k = min(bisect_left(self._weights_cdf, u), len(self._comp_cdfs) - 1)
                    c = self._comp_cdfs[k]
            self._cache[site] = c
        return c


def _pick_step(cdf: list[float], u: float) -> int:
    # first index whose cumulative weight reaches u (same rule as the kernel)
    return min(bisect_left(cdf, u), len(cdf) - 1)


def _scalar_walk(cache: _SiteDistCache, start: tuple[int, ...], key: int, n: int,
                 u_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Plain scalar walk with time-indexed uniforms; returns (positions, levels)."""
    steps = cache.steps
    cur = tuple(start)
    rows = [cur]
    for t in range(n):
        u = unit_uniform(absorb64(key, t))
        k = _pick_step(cache.cdf(cur), u)
        mv = steps[k]
        cur = tuple(a + b for a, b in zip(cur, mv))
        rows.append(cur)
    pos = np.asarray(rows, dtype=np.int64)
    return pos, pos @ u_hat


def coupled_sample(
    model: EnvironmentModel,
    x: Sequence[int],
    rng: RngStream,
    confirm: int = DEFAULT_CONFIRM,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    horizon: int | None = None,
) -> CoupledSample:
    """Draw one coupled pair (Y1, Ybar1) of difference-chain transitions.

    Per replicate, three walks run: X from 0 in environment w; the coupled
    pair X-tilde and X-bar from x, consuming one shared per-(site, visit)
    uniform table.  X-tilde always reads w; X-bar reads the independent
    environment w-bar on the sites X visits and w elsewhere, so X-tilde and
    X-bar coincide until X-bar stands on X's path.  The first replicate where
    (X, X-tilde) never backtracks yields Y1; the first where (X, X-bar) never
    backtracks yields Ybar1.
    """
    x = tuple(int(c) for c in x)
    if int(np.dot(x, model.u_hat)) != 0:
        raise ValueError("start offset must lie on level 0")
    base = rng.raw64()
    h0 = horizon if horizon is not None else confirm + 96
    replicates: list[ReplicateDiag] = []
    y1 = ybar1 = None
    m_index = mbar_index = 0
    m = 0
    while y1 is None or ybar1 is None:
        m += 1
        if m > max_attempts:
            raise SamplingError(f"coupling unresolved after {max_attempts} replicates")
        diag, ym, ybarm = _run_replicate(model, x, key64(base, m), confirm, h0)
        replicates.append(diag)
        if y1 is None and ym is not None:
            y1, m_index = ym, m
        if ybar1 is None and ybarm is not None:
            ybar1, mbar_index = ybarm, m
    agree = bool(y1 == ybar1)
    return CoupledSample(y1, ybar1, agree, tuple(replicates), m_index, mbar_index)


def _run_replicate(
    model: EnvironmentModel,
    x: tuple[int, ...],
    rep_key: int,
    confirm: int,
    horizon: int,
    _depth: int = 0,
) -> tuple[ReplicateDiag, tuple[int, ...] | None, tuple[int, ...] | None]:
    """One (X, X-tilde, X-bar) triple; returns per-replicate diagnostics and
    the difference values when the respective pair qualifies."""
    if _depth > 6:
        raise SamplingError("replicate horizon refinement did not converge")
    d = model.d
    u_hat = model.u_array
    env_w = _SiteDistCache(model, key64(rep_key, 0))
    env_wb = _SiteDistCache(model, key64(rep_key, 1))

    origin = tuple([0] * d)
    pos_x, lv_x = _scalar_walk(env_w, origin, key64(rep_key, TAG_WALK, 0), horizon, u_hat)
    visited_x = set(map(tuple, pos_x.tolist()))

    # Coupled stepping of X-tilde and X-bar with a shared uniform table
    # indexed by (site, per-walk visit count).
    table_key = key64(rep_key, TAG_STEP_TABLE)
    steps = tuple(tuple(int(c) for c in s) for s in model.union_steps)

    def table_u(site: tuple[int, ...], k: int) -> float:
        return unit_uniform(absorb64(table_key, *site, k))

    cur_t: tuple[int, ...] = x
    cur_b: tuple[int, ...] = x
    rows_t = [x]
    rows_b = [x]
    visits_t: dict[tuple[int, ...], int] = {}
    visits_b: dict[tuple[int, ...], int] = {}
    diverged_at: int | None = None
    for t in range(horizon):
        kt = visits_t.get(cur_t, 0)
        visits_t[cur_t] = kt + 1
        ut = table_u(cur_t, kt)
        st = _pick_step(env_w.cdf(cur_t), ut)
        mv = steps[st]
        nxt_t = tuple(a + b for a, b in zip(cur_t, mv))

        kb = visits_b.get(cur_b, 0)
        visits_b[cur_b] = kb + 1
        ub = table_u(cur_b, kb)
        env_b = env_wb if cur_b in visited_x else env_w
        sb = _pick_step(env_b.cdf(cur_b), ub)
        mv = steps[sb]
        nxt_b = tuple(a + b for a, b in zip(cur_b, mv))

        if diverged_at is None and nxt_t != nxt_b:
            diverged_at = t + 1
        cur_t, cur_b = nxt_t, nxt_b
        rows_t.append(cur_t)
        rows_b.append(cur_b)
    pos_xt = np.asarray(rows_t, dtype=np.int64)
    pos_xb = np.asarray(rows_b, dtype=np.int64)
    lv_xt = pos_xt @ u_hat
    lv_xb = pos_xb @ u_hat

    mu_pairs, _ = common_regen_pairs(lv_x, lv_xt, confirm, first_only=True)
    rho_pairs, _ = common_regen_pairs(lv_x, lv_xb, confirm, first_only=True)
    if not mu_pairs or not rho_pairs:
        return _run_replicate(model, x, rep_key, confirm, 2 * horizon, _depth + 1)
    mux, muxt = mu_pairs[0]
    rhox, rhoxb = rho_pairs[0]

    bt_x = bool(lv_x.min() < 0)
    bt_xt = bool(lv_xt.min() < 0)
    bt_xb = bool(lv_xb.min() < 0)

    wx = max(mux, rhox)
    wt = max(muxt, rhoxb)
    inter = visited_intersection_count(pos_x[:wx], pos_xt[:wt]) > 0 if max(wx, wt) > 0 else False

    diag = ReplicateDiag(bt_x, bt_xt, bt_xb, diverged_at, (mux, muxt), (rhox, rhoxb), inter)
    ym = tuple(int(c) for c in pos_xt[muxt] - pos_x[mux]) if not (bt_x or bt_xt) else None
    ybarm = tuple(int(c) for c in pos_xb[rhoxb] - pos_x[rhox]) if not (bt_x or bt_xb) else None
    return diag, ym, ybarm
