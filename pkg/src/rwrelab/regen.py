"""Regeneration detection on simulated paths and the slab-based estimators
for the limiting velocity and the diffusion matrix.

A time is a regeneration when the walk stands at a fresh level record and
never afterwards dips below it.  Detection implements the candidate
iteration: run to the first level a above the start; whenever a candidate is
spoiled by a later dip, run to level (max level reached by the dip time) + a
and try again.  On a finite path "never afterwards" is operationalized by a
confirmation horizon: a candidate must be followed by at least
confirm_horizon observed dip-free steps, and any observed dip disqualifies it
no matter how late.  A final candidate whose confirmation window is cut off
by the end of the path is censored and excluded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import EnvironmentModel
from .stats import InsufficientDataError, batch_means, bootstrap_ci, ols_line
from .walk import Path, first_below, path_records, suffix_min

_RANK_TOL = 1e-9


@dataclass(frozen=True)
class RegenerationRecord:
    """Detected regeneration times of one path.

    times are fully confirmed; censored_tail marks a trailing candidate that
    ran out of observed future before confirming (it is not in times).
    """

    a: int
    times: np.ndarray
    censored_tail: bool
    confirm_horizon: int | None
    tail_candidate: int | None = None

    def __post_init__(self):
        self.times.flags.writeable = False


@dataclass(frozen=True)
class Slab:
    """Piece of a path between consecutive regeneration times.

    Slab 0 runs from time 0 to the first regeneration and has a different
    law; estimators use slabs with index >= 1 only.
    """

    index: int
    duration: int
    displacement: tuple[int, ...]


def detect_regenerations(path: Path, a: int = 1, confirm_horizon: int | None = 512) -> RegenerationRecord:
    """Run the candidate iteration for regeneration times on a finite path.

    confirm_horizon=None demands dip-free observation to the end of the path
    (no censoring), which is the exhaustive finite-path reading of the
    definition and the mode matched against brute-force oracles in tests.
    """
    if a < 1:
        raise ValueError("a must be >= 1")
    if confirm_horizon is not None and confirm_horizon < 1:
        raise ValueError("confirm_horizon must be >= 1 or None")
    levels = path.levels
    n = len(path)
    sufmin = suffix_min(levels)
    rec_times, rec_vals = path_records(levels)
    n_rec = rec_times.shape[0]

    # Candidates are record times (a fresh level is reached there without
    # overshoot).  Per record: does any later dip below it exist, and is
    # enough future observed to confirm?
    nodip = np.empty(n_rec, dtype=bool)
    at_end = rec_times == n
    nodip[at_end] = True
    inner = ~at_end
    nodip[inner] = sufmin[rec_times[inner] + 1] >= rec_vals[inner]
    need = 0 if confirm_horizon is None else confirm_horizon
    acceptable = nodip & (n - rec_times >= need)
    obstructions = np.flatnonzero(~acceptable)

    times: list[int] = []
    censored = False
    tail_candidate: int | None = None

    k = int(np.searchsorted(rec_vals, int(levels[0]) + a, side="left"))
    while k < n_rec:
        if a == 1:
            # Consecutive acceptable records are consecutive regeneration
            # times (integer levels: the next record is the first time the
            # level gains at least 1 on the last accepted one).
            oi = int(np.searchsorted(obstructions, k))
            j = int(obstructions[oi]) if oi < obstructions.shape[0] else n_rec
            if j > k:
                times.extend(int(t) for t in rec_times[k:j])
                k = j
                continue
        elif acceptable[k]:
            times.append(int(rec_times[k]))
            k = int(np.searchsorted(rec_vals, int(rec_vals[k]) + a, side="left"))
            continue
        if nodip[k]:
            # Dip-free but the confirmation window is cut off by the end of
            # the path: censored trailing candidate.
            censored = True
            tail_candidate = int(rec_times[k])
            break
        # Candidate spoiled by a later dip: jump to the first record at or
        # above (maximum level reached by the dip time) + a.
        s = int(rec_times[k])
        dip = first_below(levels, s + 1, int(rec_vals[k]))
        m = int(levels[s : dip + 1].max())
        k = int(np.searchsorted(rec_vals, m + a, side="left"))

    return RegenerationRecord(
        a=a,
        times=np.asarray(times, dtype=np.int64),
        censored_tail=censored,
        confirm_horizon=confirm_horizon,
        tail_candidate=tail_candidate,
    )


def slabs(path: Path, record: RegenerationRecord) -> list[Slab]:
    """Durations and displacements between consecutive confirmed times.

    Includes the differently-distributed initial slab as index 0; returns an
    empty list when fewer than two confirmed times exist.
    """
    t = record.times
    if t.shape[0] < 2:
        return []
    out = [Slab(0, int(t[0]), tuple(int(c) for c in path.positions[t[0]] - path.positions[0]))]
    for k in range(t.shape[0] - 1):
        disp = path.positions[t[k + 1]] - path.positions[t[k]]
        out.append(Slab(k + 1, int(t[k + 1] - t[k]), tuple(int(c) for c in disp)))
    return out


def _iid_slab_arrays(slab_list: list[Slab]) -> tuple[np.ndarray, np.ndarray]:
    use = [s for s in slab_list if s.index >= 1]
    if len(use) < 2:
        raise InsufficientDataError(f"need >= 2 slabs with index >= 1, got {len(use)}")
    dur = np.asarray([s.duration for s in use], dtype=np.float64)
    disp = np.asarray([s.displacement for s in use], dtype=np.float64)
    return dur, disp


@dataclass(frozen=True)
class VelocityEstimate:
    v_hat: np.ndarray
    se: np.ndarray
    slab_count: int


@dataclass(frozen=True)
class DiffusionEstimate:
    v_hat: np.ndarray
    d_hat: np.ndarray
    se: np.ndarray
    slab_count: int


N_BATCHES = 32  # nonoverlapping batches for standard errors


def estimate_velocity(slab_list: list[Slab], n_batches: int = N_BATCHES) -> VelocityEstimate:
    """Ratio estimator (mean displacement)/(mean duration) over slabs k >= 1,
    with batch-mean standard errors."""
    dur, disp = _iid_slab_arrays(slab_list)
    v = disp.sum(axis=0) / dur.sum()
    bd = batch_means(dur, n_batches)
    bx = batch_means(disp, n_batches)
    ratios = bx / bd[:, None]
    se = ratios.std(axis=0, ddof=1) / np.sqrt(ratios.shape[0])
    return VelocityEstimate(v, se, dur.shape[0])


def estimate_diffusion(
    slab_list: list[Slab], v_hat: np.ndarray, n_batches: int = N_BATCHES
) -> DiffusionEstimate:
    """Sample diffusion matrix mean[(disp - dur*v)(disp - dur*v)^T]/mean[dur]
    over slabs k >= 1, symmetrized, with elementwise batch-mean errors."""
    dur, disp = _iid_slab_arrays(slab_list)
    v = np.asarray(v_hat, dtype=np.float64)
    centered = disp - dur[:, None] * v
    outer = centered[:, :, None] * centered[:, None, :]
    d_hat = outer.sum(axis=0) / dur.sum()
    d_hat = 0.5 * (d_hat + d_hat.T)
    bo = batch_means(outer.reshape(outer.shape[0], -1), n_batches)
    bd = batch_means(dur, n_batches)
    ratios = bo / bd[:, None]
    se = (ratios.std(axis=0, ddof=1) / np.sqrt(ratios.shape[0])).reshape(d_hat.shape)
    return DiffusionEstimate(v, d_hat, se, dur.shape[0])


@dataclass(frozen=True)
class DegeneracyReport:
    """Directions orthogonal to the span of admissible-step differences,
    along which the diffusion matrix must vanish."""

    span_basis: np.ndarray        # (r, d) rows spanning {x - y} differences
    orthogonal_dirs: np.ndarray   # (d - r, d) unit rows of the complement
    quad_forms: np.ndarray        # u^T D u for each orthogonal direction

    def summary(self) -> dict:
        return {
            "span_rank": int(self.span_basis.shape[0]),
            "orthogonal_dirs": self.orthogonal_dirs.tolist(),
            "quad_forms": self.quad_forms.tolist(),
        }


def degeneracy_check(model: EnvironmentModel, d_hat: np.ndarray) -> DegeneracyReport:
    """Evaluate u^T D u over a basis of the orthogonal complement of
    span{x - y : x, y admissible steps}."""
    steps = np.asarray(model.admissible_steps, dtype=np.float64)
    d = model.d
    if steps.shape[0] < 2:
        diffs = np.zeros((0, d))
    else:
        diffs = steps[1:] - steps[0]
    if diffs.shape[0] == 0:
        span = np.zeros((0, d))
        comp = np.eye(d)
    else:
        u_svd, sing, vt = np.linalg.svd(diffs, full_matrices=True)
        rank = int(np.sum(sing > _RANK_TOL * max(1.0, sing[0] if sing.size else 1.0)))
        span = vt[:rank]
        comp = vt[rank:]
    d_mat = np.asarray(d_hat, dtype=np.float64)
    quads = np.asarray([float(u @ d_mat @ u) for u in comp])
    return DegeneracyReport(span, comp, quads)


@dataclass(frozen=True)
class TailFit:
    """Exponential tail rate of P(T > t) ~ C exp(-rate * t)."""

    rate: float
    ci_low: float
    ci_high: float
    n_samples: int
    degenerate: bool = False

    def summary(self) -> dict:
        return {
            "rate": self.rate,
            "ci95": [self.ci_low, self.ci_high],
            "n_samples": self.n_samples,
            "degenerate": self.degenerate,
        }


MIN_TAIL_SAMPLES = 50


def _survival_slope(samples: np.ndarray, qlo: float, qhi: float) -> float | None:
    """Least-squares slope of log empirical survival over [Q(qlo), Q(qhi)]."""
    n = samples.shape[0]
    lo, hi = np.quantile(samples, [qlo, qhi])
    values, counts = np.unique(samples, return_counts=True)
    surv = n - np.cumsum(counts)  # #{T > value}
    keep = (values >= lo) & (values <= hi) & (surv > 0)
    if int(keep.sum()) < 2:
        return None
    t = values[keep].astype(np.float64)
    y = np.log(surv[keep] / n)
    try:
        return -ols_line(t, y).slope
    except InsufficientDataError:
        return None


def tail_fit(
    samples: np.ndarray,
    qlo: float = 0.5,
    qhi: float = 0.99,
    n_boot: int = 200,
    seed: int = 0,
) -> TailFit:
    """Fit the exponential decay rate of the empirical survival function
    over its central-to-upper quantile range, with a bootstrap CI."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[0] < MIN_TAIL_SAMPLES:
        raise InsufficientDataError(
            f"tail fit needs >= {MIN_TAIL_SAMPLES} samples, got {samples.shape[0]}"
        )
    point = _survival_slope(samples, qlo, qhi)
    if point is None:
        inf = float("inf")
        return TailFit(inf, inf, inf, samples.shape[0], degenerate=True)

    def stat(s: np.ndarray) -> float:
        v = _survival_slope(s, qlo, qhi)
        return point if v is None else v

    lo, hi = bootstrap_ci(samples, stat, n_boot=n_boot, seed=seed)
    return TailFit(point, lo, hi, samples.shape[0])
