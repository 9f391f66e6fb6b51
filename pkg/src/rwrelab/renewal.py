"""One-dimensional renewal and absorption numerics: half-line Green
functions by direct linear solve, forward recurrence times by the discrete
renewal recursion, and box-exit / occupation experiments for difference
chains.

The Green table g(s, t) is the expected number of visits to t (counting
time 0) of a one-dimensional walk started at s, before it first enters the
absorbing half-line (-inf, r0].  It solves g = I + P g where P is the walk
kernel restricted to states above r0.  The infinite system is truncated at a
ceiling with reflection (steps that would land above the ceiling are clamped
to it); the ceiling is doubled until window values stabilize, which for
walks with no upward drift converges quickly (and is exact at any ceiling
for the simple +-1 walk).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .stats import InsufficientDataError, fit_loglog, FitResult, degenerate_fit


class GreenConvergenceError(RuntimeError):
    """Ceiling refinement failed to stabilize the Green window."""


@dataclass(frozen=True)
class OneDimWalk:
    """Integer-step distribution of a one-dimensional walk."""

    steps: tuple[int, ...]
    probs: tuple[float, ...]

    def __init__(self, steps: Sequence[int], probs: Sequence[float]):
        steps_t = tuple(int(s) for s in steps)
        probs_t = tuple(float(p) for p in probs)
        if len(steps_t) != len(probs_t) or not steps_t:
            raise ValueError("steps and probs must align and be nonempty")
        if len(set(steps_t)) != len(steps_t):
            raise ValueError("duplicate steps")
        if any(p < 0 for p in probs_t):
            raise ValueError("negative probability")
        total = sum(probs_t)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total}, not 1")
        object.__setattr__(self, "steps", steps_t)
        object.__setattr__(self, "probs", tuple(p / total for p in probs_t))

    @property
    def is_symmetric(self) -> bool:
        table = dict(zip(self.steps, self.probs))
        return all(abs(p - table.get(-s, 0.0)) <= 1e-12 for s, p in table.items())

    @property
    def mean(self) -> float:
        return float(np.dot(self.steps, self.probs))

    def can_move_left(self) -> bool:
        return any(s < 0 and p > 0 for s, p in zip(self.steps, self.probs))


def symmetric_walk(half_steps: Mapping[int, float], hold: float = 0.0) -> OneDimWalk:
    """Build a symmetric walk from {positive step: probability} plus an
    optional holding probability at 0; the negative side is mirrored."""
    steps = [0] if hold > 0 else []
    probs = [hold] if hold > 0 else []
    for s, p in sorted(half_steps.items()):
        if s <= 0:
            raise ValueError("half_steps keys must be positive")
        steps.extend([s, -s])
        probs.extend([p, p])
    return OneDimWalk(steps, probs)


@dataclass(frozen=True)
class GreenTable:
    """g(s, t) on the window s, t in (r0, r0 + window]."""

    r0: int
    window: int
    ceiling: int
    values: np.ndarray  # (window, window); values[i, j] = g(r0+1+i, r0+1+j)

    def __post_init__(self):
        self.values.flags.writeable = False

    def g(self, s: int, t: int) -> float:
        """Green value; 0 for s already absorbed; (s, t) must lie in the
        window otherwise."""
        if s <= self.r0:
            return 0.0
        i, j = s - self.r0 - 1, t - self.r0 - 1
        if not (0 <= i < self.window and 0 <= j < self.window):
            raise IndexError(f"({s},{t}) outside the solved window")
        return float(self.values[i, j])


def _green_window(walk: OneDimWalk, r0: int, window: int, ceiling: int) -> np.ndarray:
    """Solve the truncated linear system on states r0+1..ceiling and return
    the (window, window) corner."""
    m = ceiling - r0
    steps = np.asarray(walk.steps, dtype=np.int64)
    probs = np.asarray(walk.probs, dtype=np.float64)
    lo = int(-steps.min()) if steps.min() < 0 else 0
    hi = int(steps.max()) if steps.max() > 0 else 0
    # Banded (I - P): row s (state r0+1+s), columns s+step, clamped to the
    # ceiling; landing at or below r0 is absorption (mass dropped).
    ab = np.zeros((lo + hi + 1, m))
    ab[hi, :] += 1.0
    for step, p in zip(steps, probs):
        if p == 0.0:
            continue
        for s in range(m):
            t = min(s + step, m - 1)
            if t < 0:
                continue  # absorbed
            band_row = hi + s - t
            if 0 <= band_row < lo + hi + 1:
                ab[band_row, t] -= p
            else:  # clamped landing fell outside the band: fold explicitly
                raise AssertionError("band bookkeeping error")
    rhs = np.zeros((m, window))
    for j in range(window):
        rhs[j, j] = 1.0
    sol = solve_banded((lo, hi), ab, rhs)
    return sol[:window, :]


def halfline_green(
    walk: OneDimWalk,
    r0: int,
    window: int,
    ceiling: int | None = None,
    tol: float = 1e-9,
    max_ceiling: int = 1 << 17,
) -> GreenTable:
    """Expected-visit table with absorption below r0+1, to tolerance tol.

    The truncation ceiling is doubled until the window changes by less than
    tol; raises GreenConvergenceError if max_ceiling is reached first.
    """
    if not walk.can_move_left():
        raise ValueError("walk never moves left: Green values diverge")
    if window < 1:
        raise ValueError("window must be >= 1")
    c = ceiling if ceiling is not None else max(4 * window + r0, r0 + 64)
    if c <= r0 + window:
        raise ValueError("ceiling must exceed r0 + window")
    prev = _green_window(walk, r0, window, c)
    while True:
        c2 = 2 * (c - r0) + r0
        if c2 > max_ceiling:
            raise GreenConvergenceError(
                f"window not stable at ceiling {c} (max {max_ceiling})"
            )
        cur = _green_window(walk, r0, window, c2)
        if float(np.max(np.abs(cur - prev))) < tol:
            return GreenTable(r0, window, c2, cur)
        prev, c = cur, c2


def simulate_green_counts(
    walk: OneDimWalk,
    r0: int,
    start: int,
    window: int,
    n_excursions: int,
    seed: int,
    ceiling: int | None = None,
    step_cap: int = 2_000_000_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo visit counts: mean and standard error of visits to each
    window state before absorption, over independent excursions from start.

    A symmetric walk is null recurrent (absorption is sure but with infinite
    expected delay), so excursions reflect at a high ceiling; as in the
    solver's truncation analysis the effect on window visit counts decays
    rapidly in the ceiling height and is exact for the simple +-1 walk.
    """
    rng = np.random.default_rng(seed)
    steps = np.asarray(walk.steps, dtype=np.int64)
    cdf = np.cumsum(walk.probs)
    cap = ceiling if ceiling is not None else r0 + max(8 * window, 257)
    counts = np.zeros((n_excursions, window), dtype=np.int64)
    pos = np.full(n_excursions, start, dtype=np.int64)
    rows = np.arange(n_excursions)
    idx_base = r0 + 1
    total = 0
    while rows.size:
        vis = pos - idx_base
        ok = (vis >= 0) & (vis < window)
        np.add.at(counts, (rows[ok], vis[ok]), 1)
        draws = np.searchsorted(cdf, rng.random(rows.size), side="left")
        pos += steps[np.minimum(draws, steps.size - 1)]
        np.minimum(pos, cap, out=pos)
        alive = pos > r0
        rows = rows[alive]
        pos = pos[alive]
        total += int(alive.size)
        if total > step_cap:
            raise RuntimeError("excursions exceeded the step cap")
    mean = counts.mean(axis=0)
    se = counts.std(axis=0, ddof=1) / np.sqrt(n_excursions)
    return mean, se


# ---------------------------------------------------------------------------
# Forward recurrence times
# ---------------------------------------------------------------------------


def forward_recurrence(duration_law: Mapping[int, object], n_max: int, p: int = 1) -> list:
    """E[B_n^p] for n = 0..n_max by the discrete renewal recursion

        E B_n^p = z(n) + sum_{k=1}^{n-1} P(Y=k) E B_{n-k}^p,
        z(n) = E ((Y - n)^+)^p,

    where B_n is the distance from n to the next renewal epoch of the i.i.d.
    sum of durations Y.  Works with any numeric type supporting + and *
    (e.g. fractions.Fraction for exact arithmetic).
    """
    items = sorted((int(k), v) for k, v in duration_law.items())
    if any(k < 1 for k, _ in items):
        raise ValueError("durations must be positive integers")
    zero = 0 * items[0][1]

    def z(n: int):
        acc = zero
        for y, prob in items:
            if y > n:
                acc = acc + prob * (y - n) ** p
        return acc

    out = [zero]
    for n in range(1, n_max + 1):
        acc = z(n)
        for y, prob in items:
            if 1 <= y <= n - 1:
                acc = acc + prob * out[n - y]
        out.append(acc)
    return out


def recurrence_partial_sums(duration_law: Mapping[int, object], n_max: int, p: int = 1) -> list:
    """Cumulative sums of z(k), the a-priori bound sup_n E B_n^p <= sum z(k)."""
    items = sorted((int(k), v) for k, v in duration_law.items())
    zero = 0 * items[0][1]
    out = []
    acc = zero
    for n in range(1, n_max + 1):
        zk = zero
        for y, prob in items:
            if y > n:
                zk = zk + prob * (y - n) ** p
        acc = acc + zk
        out.append(acc)
    return out


# ---------------------------------------------------------------------------
# Difference-chain experiments (drivers are injected; the lab wires in the
# rejection sampler of the pair module)
# ---------------------------------------------------------------------------

ChainStepFn = Callable[[np.ndarray, int], np.ndarray]
"""Advance a batch of chain states (R, d) -> (R, d); the int is a round key."""


@dataclass(frozen=True)
class BoxExitResult:
    r: int
    replicas: int
    mean_steps: float
    q50: float
    q95: float
    cap_hits: int
    step_cap: int

    def summary(self) -> dict:
        return {
            "r": self.r,
            "replicas": self.replicas,
            "mean_steps": self.mean_steps,
            "q50": self.q50,
            "q95": self.q95,
            "cap_hits": self.cap_hits,
            "step_cap": self.step_cap,
        }


def box_exit_experiment(
    step_fn: ChainStepFn,
    d: int,
    r: int,
    start: Sequence[int],
    replicas: int,
    step_cap: int = 4096,
) -> BoxExitResult:
    """Steps until the chain leaves the centered box [-r, r]^d.

    Capped replicas are reported, not silently truncated: cap hits enter the
    mean at the cap value (a lower bound) and are counted separately.
    """
    start_arr = np.asarray(list(start), dtype=np.int64)
    if np.any(np.abs(start_arr) > r):
        return BoxExitResult(r, replicas, 0.0, 0.0, 0.0, 0, step_cap)
    states = np.tile(start_arr, (replicas, 1))
    exit_at = np.full(replicas, step_cap, dtype=np.int64)
    active = np.ones(replicas, dtype=bool)
    k = 0
    while active.any() and k < step_cap:
        idx = np.flatnonzero(active)
        states[idx] = step_fn(states[idx], k)
        k += 1
        out = np.abs(states[idx]).max(axis=1) > r
        exit_at[idx[out]] = k
        active[idx[out]] = False
    cap_hits = int(active.sum())
    return BoxExitResult(
        r,
        replicas,
        float(exit_at.mean()),
        float(np.quantile(exit_at, 0.5)),
        float(np.quantile(exit_at, 0.95)),
        cap_hits,
        step_cap,
    )


@dataclass(frozen=True)
class OccupationResult:
    n_grid: tuple[int, ...]
    sums: tuple[float, ...]   # S_n at each grid point
    fit: FitResult
    replicas: int

    def summary(self) -> dict:
        return {
            "n_grid": list(self.n_grid),
            "sums": list(self.sums),
            "fit": self.fit.summary(),
            "replicas": self.replicas,
        }


def occupation_experiment(
    step_fn: ChainStepFn,
    d: int,
    decay_rate: float,
    scale: float,
    n_grid: Sequence[int],
    replicas: int,
    start: Sequence[int] | None = None,
) -> OccupationResult:
    """Occupation sums S_n = sum_{k<n} mean_replicas h(Y_k) for
    h(y) = scale * exp(-decay_rate * |y|), with a log-log growth fit."""
    grid = sorted(int(n) for n in n_grid)
    n_max = grid[-1]
    states = np.tile(
        np.asarray(list(start) if start is not None else [0] * d, dtype=np.int64),
        (replicas, 1),
    )
    running = 0.0
    sums: dict[int, float] = {}
    for k in range(n_max):
        norms = np.sqrt((states.astype(np.float64) ** 2).sum(axis=1))
        running += scale * float(np.exp(-decay_rate * norms).mean())
        if k + 1 in grid:
            sums[k + 1] = running
        if k + 1 < n_max:
            states = step_fn(states, k)
    values = np.asarray([sums[n] for n in grid], dtype=np.float64)
    try:
        fit = fit_loglog(np.asarray(grid, dtype=np.float64), values)
    except (ValueError, InsufficientDataError):
        fit = degenerate_fit(len(grid))
    return OccupationResult(tuple(grid), tuple(float(v) for v in values), fit, replicas)
