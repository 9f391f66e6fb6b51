"""Quenched walk simulation and level/hitting stopping times.

A Path stores the full position history (random access is needed downstream
for regeneration detection and intersection counting) plus cached integer
levels x . u_hat.  Simulation is driven by counter-based uniforms, so a walk
is a pure function of (environment, start, RNG key) and replays bitwise.

The batched engine advances many walkers in lockstep with numpy; the scalar
simulate() is a batch of one.  Paths are immutable after simulation; many
walks may run in parallel against one shared Environment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from . import kernels
from .env import Environment, EnvironmentModel, Homogeneous, TwoPointMixture, drift
from .hashing import MASK64, TAG_WALK, absorb64, key64, tagged_env_keys, unit_uniform


@dataclass(frozen=True)
class Path:
    """Realized trajectory with cached levels.

    positions has shape (n+1, d); levels[k] = positions[k] . u_hat.
    """

    start: tuple[int, ...]
    positions: np.ndarray
    levels: np.ndarray
    u_hat: tuple[int, ...]

    def __post_init__(self):
        self.positions.flags.writeable = False
        self.levels.flags.writeable = False

    def __len__(self) -> int:
        """Number of steps (positions minus one)."""
        return self.positions.shape[0] - 1

    @property
    def d(self) -> int:
        return self.positions.shape[1]


def make_path(positions: np.ndarray, u_hat: Sequence[int]) -> Path:
    positions = np.ascontiguousarray(positions, dtype=np.int64)
    u = np.asarray(u_hat, dtype=np.int64)
    levels = positions @ u
    return Path(tuple(int(c) for c in positions[0]), positions, levels, tuple(int(c) for c in u))


def path_from_levels(levels: Sequence[int]) -> Path:
    """Synthetic 2-d path realizing a given level sequence (for tests and
    oracles: level logic only depends on the level sequence)."""
    lv = np.asarray(levels, dtype=np.int64)
    pos = np.zeros((len(lv), 2), dtype=np.int64)
    pos[:, 0] = lv
    pos[:, 1] = np.arange(len(lv))  # make sites distinct
    return make_path(pos, (1, 0))


@dataclass
class RngStream:
    """Keyed counter-based uniform stream.

    Streams with distinct (master_seed, domain, replica, walker) keys are
    independent; replaying from the same key reproduces the same draws.
    """

    master_seed: int
    domain: int = TAG_WALK
    replica: int = 0
    walker: int = 0
    counter: int = 0
    _base: int = field(init=False, repr=False)

    def __post_init__(self):
        self._base = key64(self.master_seed, self.domain, self.replica, self.walker)

    @property
    def base_key(self) -> int:
        return self._base

    def uniform(self) -> float:
        u = unit_uniform(absorb64(self._base, self.counter))
        self.counter += 1
        return u

    def raw64(self) -> int:
        """Draw a 64-bit value (for deriving child seeds)."""
        v = absorb64(self._base, self.counter)
        self.counter += 1
        return v

    def child(self, *ids: int) -> "RngStream":
        s = RngStream(0, 0)
        s.master_seed = self.master_seed
        s.domain = self.domain
        s.replica = self.replica
        s.walker = self.walker
        s.counter = 0
        s._base = absorb64(self._base, *ids)
        return s


# ---------------------------------------------------------------------------
# Batched simulation engine
# ---------------------------------------------------------------------------


class WalkerBatch:
    """B walkers advanced in lockstep, each in its own environment seed and
    with its own step-uniform key.  Extendable: stepping continues from the
    current state, so a batch can be grown until stopping times resolve.

    The inner loop runs in the compiled kernel when numba is available and
    falls back to the bitwise-identical vectorized path otherwise.
    """

    use_compiled = kernels.HAVE_NUMBA

    def __init__(
        self,
        model: EnvironmentModel,
        env_seeds: np.ndarray,
        walk_keys: np.ndarray,
        starts: np.ndarray,
        record: bool | str = True,
        accumulate_drift: bool = False,
    ):
        self.model = model
        self.env_seeds = np.asarray(env_seeds, dtype=np.uint64)
        self.walk_keys = np.asarray(walk_keys, dtype=np.uint64)
        starts = np.atleast_2d(np.asarray(starts, dtype=np.int64))
        self.B, d = starts.shape
        if self.env_seeds.shape == ():
            self.env_seeds = np.full(self.B, self.env_seeds, dtype=np.uint64)
        if self.walk_keys.shape == ():
            self.walk_keys = np.full(self.B, self.walk_keys, dtype=np.uint64)
        self._tagged_env = tagged_env_keys(self.env_seeds)
        self.pos = starts.copy()
        self.t = 0
        self._rec_pos = record in (True, "full")
        self._rec_lvl = self._rec_pos or record == "levels"
        self.levels = (self.pos @ model.u_array).astype(np.int64)
        self.accumulate_drift = accumulate_drift
        self.drift_sum = np.zeros((self.B, d)) if accumulate_drift else np.zeros((1, 1))

        fam = model.family
        m = model.step_array.shape[0]
        self._steps_f = model.step_array.astype(np.float64)
        self._row_cdf = np.zeros(m)
        self._row_b = np.zeros(m)
        self._row_diff = np.zeros(m)
        self._comp_rows = np.zeros((1, m))
        self._weights_cdf = np.zeros(1)
        self._homog_drift = np.zeros(d)
        rows = model._component_prob_rows
        if isinstance(fam, Homogeneous):
            self._family_code = kernels.FAMILY_HOMOGENEOUS
            self._row_cdf = np.cumsum(rows[0])
            acc = np.zeros(d)
            for j in range(m):
                acc += rows[0][j] * self._steps_f[j]
            self._homog_drift = acc
        elif isinstance(fam, TwoPointMixture):
            self._family_code = kernels.FAMILY_TWO_POINT
            self._row_b = rows[1].copy()
            self._row_diff = rows[0] - rows[1]
        else:
            self._family_code = kernels.FAMILY_FINITE
            self._comp_rows = rows.copy()
            self._weights_cdf = np.cumsum(fam.weights)

        # Histories are time-major so the kernel's per-step writes are
        # contiguous across walkers.
        self._capacity = 0
        self._pos_hist = np.zeros((1, self.B, d), dtype=np.int64)
        self._lvl_hist = np.zeros((1, self.B), dtype=np.int64)
        if self._rec_pos or self._rec_lvl:
            self._grow(64)
            if self._rec_pos:
                self._pos_hist[0, :, :] = self.pos
            self._lvl_hist[0, :] = self.levels

    def _grow(self, horizon: int) -> None:
        if horizon < self._capacity:
            return
        cap = max(horizon + 1, 2 * self._capacity + 64)
        if self._rec_pos:
            new_pos = np.zeros((cap, self.B, self.pos.shape[1]), dtype=np.int64)
            new_pos[: self._capacity] = self._pos_hist[: self._capacity]
            self._pos_hist = new_pos
        if self._rec_lvl:
            new_lvl = np.zeros((cap, self.B), dtype=np.int64)
            new_lvl[: self._capacity] = self._lvl_hist[: self._capacity]
            self._lvl_hist = new_lvl
        self._capacity = cap

    def step(self, n: int = 1) -> None:
        if n <= 0:
            return
        if self._rec_pos or self._rec_lvl:
            self._grow(self.t + n)
        fn = kernels.advance if self.use_compiled else kernels.advance_numpy
        fn(
            self.pos, self.levels, self._tagged_env, self.walk_keys,
            self.t, n,
            self.model.step_array, self.model.step_levels, self._steps_f,
            self._family_code, self._row_cdf, self._row_b, self._row_diff,
            self._comp_rows, self._weights_cdf,
            self._rec_pos, self._rec_lvl, self._pos_hist, self._lvl_hist,
            self.accumulate_drift, self.drift_sum, self._homog_drift,
        )
        self.t += n

    def positions_history(self) -> np.ndarray:
        """(B, t+1, d) recorded positions (a transposed view; use
        walker_positions for a contiguous single-walker copy)."""
        return self._pos_hist[: self.t + 1].transpose(1, 0, 2)

    def levels_history(self) -> np.ndarray:
        """(B, t+1) recorded levels (a transposed view)."""
        return self._lvl_hist[: self.t + 1].T

    def walker_positions(self, b: int) -> np.ndarray:
        """Contiguous (t+1, d) positions of walker b."""
        return np.ascontiguousarray(self._pos_hist[: self.t + 1, b])

    def walker_levels(self, b: int) -> np.ndarray:
        """Contiguous (t+1,) levels of walker b."""
        return np.ascontiguousarray(self._lvl_hist[: self.t + 1, b])


def simulate_batch(
    model: EnvironmentModel,
    env_seeds: np.ndarray,
    walk_keys: np.ndarray,
    starts: np.ndarray,
    n: int,
    checkpoints: Sequence[int] | None = None,
    checkpoint_drift: bool = False,
) -> np.ndarray | dict[int, np.ndarray]:
    """Simulate B walks for n steps.

    With checkpoints=None returns full histories (B, n+1, d); otherwise
    returns {n_k: positions (B, d)} at the requested times only, bounding
    memory for long horizons.  checkpoint_drift=True records instead the
    accumulated local drift sum_{j<n_k} D(T_{X_j} omega), an unbiased
    estimator of the quenched mean position with much less step noise.
    """
    if checkpoints is None:
        batch = WalkerBatch(model, env_seeds, walk_keys, starts, record=True)
        batch.step(n)
        return batch.positions_history()
    batch = WalkerBatch(model, env_seeds, walk_keys, starts, record=False,
                        accumulate_drift=checkpoint_drift)
    out: dict[int, np.ndarray] = {}
    last = 0
    for ck in sorted(set(int(c) for c in checkpoints)):
        if ck > n:
            break
        batch.step(ck - last)
        out[ck] = batch.drift_sum.copy() if checkpoint_drift else batch.pos.copy()
        last = ck
    return out


def simulate(env: Environment, start: Sequence[int], n: int, rng: RngStream) -> Path:
    """Quenched walk of n steps from start in the given environment."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    batch = WalkerBatch(
        env.model,
        np.uint64(env.master_seed & MASK64),
        np.uint64(rng.base_key),
        np.asarray([list(start)], dtype=np.int64),
        record=True,
    )
    batch.step(n)
    return make_path(batch.positions_history()[0], env.model.u_hat)


# ---------------------------------------------------------------------------
# Stopping times and functionals
# ---------------------------------------------------------------------------


def backtrack_time(path: Path) -> int | None:
    """First time the level drops below the starting level; None if never
    within the path.  (The infimum over n >= 0 is vacuous at n = 0.)"""
    below = path.levels[1:] < path.levels[0]
    if not below.any():
        return None
    return int(np.argmax(below)) + 1


HitMode = Literal["relative", "absolute", "absolute_strict"]


def level_hit(path: Path, ell: int, mode: HitMode = "relative") -> int | None:
    """First index at which the walk's level meets a threshold.

    relative:        level - start_level >= ell
    absolute:        level >= ell
    absolute_strict: level >  ell
    None if the threshold is never met within the path.
    """
    if mode == "relative":
        ok = path.levels - path.levels[0] >= ell
    elif mode == "absolute":
        ok = path.levels >= ell
    elif mode == "absolute_strict":
        ok = path.levels > ell
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if not ok.any():
        return None
    return int(np.argmax(ok))


def running_max(path: Path, n: int, absolute: bool = False) -> int:
    """Maximum level over times 0..n, relative to the start by default."""
    if n > len(path):
        raise ValueError("n beyond path horizon")
    m = int(path.levels[: n + 1].max())
    return m if absolute else m - int(path.levels[0])


def hitting_time(path: Path, z: Sequence[int]) -> int | None:
    """First time n >= 1 with X_n = z; None if z is not revisited/visited."""
    target = np.asarray(list(z), dtype=np.int64)
    hits = np.all(path.positions[1:] == target, axis=1)
    if not hits.any():
        return None
    return int(np.argmax(hits)) + 1


def scaled_value(path: Path, v: np.ndarray, n: int, t: float) -> np.ndarray:
    """Centered, diffusively scaled position (X_[nt] - [nt] v) / sqrt(n)."""
    k = int(np.floor(n * t))
    if k > len(path):
        raise ValueError(f"time {t} at scale {n} needs {k} steps, path has {len(path)}")
    return (path.positions[k] - k * np.asarray(v, dtype=np.float64)) / np.sqrt(n)


@dataclass(frozen=True)
class Observable:
    """Scalar or vector functional of the environment near a site.

    fn(env, x) must only read sites within window_radius of x.
    """

    name: str
    window_radius: int
    fn: Callable[[Environment, np.ndarray], np.ndarray | float]


def drift_observable() -> Observable:
    return Observable("drift", 0, lambda env, x: drift(env.site_distribution(x)))


def env_process_average(
    env: Environment, path: Path, observable: Observable | str = "drift"
) -> np.ndarray:
    """Running Cesaro averages (1/n) sum_{j<n} Psi(environment seen from X_j).

    For the drift observable the averages estimate the long-run mean local
    drift, which equals the walk's limiting velocity.  Returns an array of
    length len(path) (empty path -> empty sequence); vector observables give
    one row per n.
    """
    if isinstance(observable, str):
        if observable != "drift":
            raise ValueError("only the built-in 'drift' observable has a name")
        observable = drift_observable()
    n = len(path)
    if n == 0:
        return np.zeros((0,))
    if observable.name == "drift" and not env.model.family.is_random:
        # Homogeneous: constant sequence.
        val = np.asarray(observable.fn(env, path.positions[0]), dtype=np.float64)
        return np.tile(val, (n, 1)) if val.ndim else np.full(n, float(val))
    if observable.name == "drift":
        probs = env.site_probs(path.positions[:n])
        values = probs @ env.model.step_array.astype(np.float64)
    else:
        values = np.asarray([observable.fn(env, x) for x in path.positions[:n]], dtype=np.float64)
    csum = np.cumsum(values, axis=0)
    denom = np.arange(1, n + 1, dtype=np.float64)
    return csum / (denom[:, None] if csum.ndim == 2 else denom)


def path_records(levels: np.ndarray, start: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Strictly increasing record times/values of levels[start:].

    Index 'start' itself is the first record.  Record times are absolute
    indices into levels.  These are exactly the times at which a level
    threshold can be hit without overshoot.
    """
    lv = levels[start:]
    runmax = np.maximum.accumulate(lv)
    is_rec = np.empty(lv.shape, dtype=bool)
    is_rec[0] = True
    is_rec[1:] = lv[1:] > runmax[:-1]
    times = np.flatnonzero(is_rec) + start
    return times, levels[times]


def suffix_min(levels: np.ndarray) -> np.ndarray:
    """suffix_min[i] = min(levels[i:])."""
    return np.minimum.accumulate(levels[::-1])[::-1]


def first_below(levels: np.ndarray, start: int, thresh: int, chunk: int = 256) -> int | None:
    """First index >= start with levels[index] < thresh; None if none.

    Chunked scan: dips are typically near start, so the scan rarely touches
    the whole suffix.
    """
    n = levels.shape[0]
    i = start
    while i < n:
        j = min(n, i + chunk)
        seg = levels[i:j] < thresh
        if seg.any():
            return i + int(np.argmax(seg))
        i = j
        chunk *= 2
    return None
