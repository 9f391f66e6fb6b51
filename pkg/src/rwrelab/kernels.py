"""Compiled stepping kernel for the batched walker engine.

The kernel advances B walkers n steps with all randomness derived from
splitmix64 keys, writing positions/levels/drift accumulators in place.  It
reproduces, bit for bit, the vectorized numpy path in walk.py: identical key
derivations, identical float expressions in identical evaluation order, and
the same tie-breaking rule for inverse-CDF sampling (an index is selected at
the first cumulative weight >= the uniform).

numba is optional: without it the numpy path runs alone (slower, same
numbers).
"""

from __future__ import annotations

import numpy as np

from .hashing import GOLDEN, U53_INV, _MULT1, _MULT2

try:  # pragma: no cover - exercised indirectly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


FAMILY_HOMOGENEOUS = 0
FAMILY_TWO_POINT = 1
FAMILY_FINITE = 2

_U64 = np.uint64
_GOLD = _U64(GOLDEN)
_M1 = _U64(_MULT1)
_M2 = _U64(_MULT2)


@njit(cache=True, nogil=True, inline="always")
def _mix(h):
    h ^= h >> _U64(30)
    h *= _M1
    h ^= h >> _U64(27)
    h *= _M2
    h ^= h >> _U64(31)
    return h


@njit(cache=True, nogil=True, inline="always")
def _absorb(h, p):
    return _mix(h + _GOLD + p)


@njit(cache=True, nogil=True)
def advance(
    pos,            # (B, d) int64, in/out
    lvl,            # (B,) int64, in/out
    tagged_env,     # (B,) uint64: env seeds with the ENV tag absorbed
    walk_keys,      # (B,) uint64
    t0,             # int: global step counter at entry
    n_steps,        # int
    steps_i,        # (m, d) int64
    step_levels,    # (m,) int64
    steps_f,        # (m, d) float64
    family_code,    # 0 homogeneous, 1 two-point mixture, 2 finite mixture
    row_cdf,        # (m,) float64: homogeneous cumulative probabilities
    row_b,          # (m,) float64: two-point second endpoint
    row_diff,       # (m,) float64: two-point first minus second endpoint
    comp_rows,      # (K, m) float64: finite-mixture component rows
    weights_cdf,    # (K,) float64
    rec_pos,        # bool: write pos_hist
    rec_lvl,        # bool: write lvl_hist
    pos_hist,       # (T, B, d) int64, time-major so step writes are contiguous
    lvl_hist,       # (T, B) int64
    acc_drift,      # bool
    drift_sum,      # (B, d) float64, in/out
    homog_drift,    # (d,) float64: precomputed homogeneous mean step
):
    B, d = pos.shape
    m = steps_i.shape[0]
    for t in range(n_steps):
        tt = _U64(t0 + t)
        for b in range(B):
            u = np.float64(_absorb(walk_keys[b], tt) >> _U64(11)) * U53_INV
            idx = -1
            if family_code == FAMILY_HOMOGENEOUS:
                for j in range(m):
                    if u <= row_cdf[j]:
                        idx = j
                        break
                if acc_drift:
                    for c in range(d):
                        drift_sum[b, c] += homog_drift[c]
            else:
                hk = tagged_env[b]
                for c in range(d):
                    hk = _absorb(hk, _U64(pos[b, c]))
                us = np.float64(hk >> _U64(11)) * U53_INV
                if family_code == FAMILY_TWO_POINT:
                    acc = 0.0
                    for j in range(m):
                        p = row_b[j] + us * row_diff[j]
                        acc += p
                        if idx < 0 and u <= acc:
                            idx = j
                        if acc_drift:
                            for c in range(d):
                                drift_sum[b, c] += p * steps_f[j, c]
                else:
                    k = weights_cdf.shape[0] - 1
                    for j in range(weights_cdf.shape[0]):
                        if us <= weights_cdf[j]:
                            k = j
                            break
                    acc = 0.0
                    for j in range(m):
                        p = comp_rows[k, j]
                        acc += p
                        if idx < 0 and u <= acc:
                            idx = j
                        if acc_drift:
                            for c in range(d):
                                drift_sum[b, c] += p * steps_f[j, c]
            if idx < 0:
                idx = m - 1
            for c in range(d):
                pos[b, c] += steps_i[idx, c]
            lvl[b] += step_levels[idx]
            if rec_pos:
                for c in range(d):
                    pos_hist[t0 + t + 1, b, c] = pos[b, c]
            if rec_lvl:
                lvl_hist[t0 + t + 1, b] = lvl[b]


def advance_numpy(
    pos, lvl, tagged_env, walk_keys, t0, n_steps,
    steps_i, step_levels, steps_f,
    family_code, row_cdf, row_b, row_diff, comp_rows, weights_cdf,
    rec_pos, rec_lvl, pos_hist, lvl_hist,
    acc_drift, drift_sum, homog_drift,
):
    """Vectorized reference path; bitwise-identical to the compiled kernel."""
    B, d = pos.shape
    m = steps_i.shape[0]
    for t in range(n_steps):
        tt = t0 + t
        u = ((_mix_np(walk_keys + _GOLD + _U64(tt))) >> _U64(11)).astype(np.float64) * U53_INV
        if family_code == FAMILY_HOMOGENEOUS:
            idx = np.searchsorted(row_cdf, u, side="left")
            if acc_drift:
                drift_sum += homog_drift
        else:
            hk = tagged_env
            for c in range(d):
                hk = _mix_np(hk + _GOLD + pos[:, c].view(np.uint64))
            us = (hk >> _U64(11)).astype(np.float64) * U53_INV
            if family_code == FAMILY_TWO_POINT:
                probs = row_b + us[:, None] * row_diff
            else:
                k = np.searchsorted(weights_cdf, us, side="left")
                k = np.minimum(k, weights_cdf.shape[0] - 1)
                probs = comp_rows[k]
            cdf = np.cumsum(probs, axis=1)
            mask = u[:, None] <= cdf
            idx = mask.argmax(axis=1)
            idx[~mask.any(axis=1)] = m - 1
            if acc_drift:
                for j in range(m):
                    drift_sum += probs[:, j, None] * steps_f[j]
        idx = np.minimum(idx, m - 1)
        pos += steps_i[idx]
        lvl += step_levels[idx]
        if rec_pos:
            pos_hist[tt + 1, :, :] = pos
        if rec_lvl:
            lvl_hist[tt + 1, :] = lvl


def _mix_np(h: np.ndarray) -> np.ndarray:
    h = h.copy()
    h ^= h >> _U64(30)
    h *= _M1
    h ^= h >> _U64(27)
    h *= _M2
    h ^= h >> _U64(31)
    return h
