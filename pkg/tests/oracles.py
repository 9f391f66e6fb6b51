"""Brute-force reference implementations used only by the tests.

These recompute stopping times directly from their definitions with plain
scans and no shared state with the production code, so agreement on
exhaustively enumerated paths is meaningful.
"""

from __future__ import annotations

import numpy as np


def naive_regeneration_times(levels, a=1, confirm=None):
    """Literal candidate iteration: run to level a above the start; while the
    walk later dips below a candidate, run to (max level reached by the dip
    time) + a; accept a candidate with no observed dip after it and, when a
    confirmation horizon is given, at least that many observed steps after.

    Returns (times, censored, tail_candidate).
    """
    lv = list(int(x) for x in levels)
    n = len(lv) - 1

    def first_at_or_above(start, target):
        for i in range(start, n + 1):
            if lv[i] >= target:
                return i
        return None

    def first_dip_after(s):
        for i in range(s + 1, n + 1):
            if lv[i] < lv[s]:
                return i
        return None

    times = []
    censored = False
    tail = None
    target = lv[0] + a
    start = 0
    while True:
        s = first_at_or_above(start, target)
        if s is None:
            break
        dip = first_dip_after(s)
        if dip is None:
            if confirm is None or (n - s) >= confirm:
                times.append(s)
                start, target = s, lv[s] + a
                continue
            censored, tail = True, s
            break
        start, target = dip, max(lv[s : dip + 1]) + a
    return times, censored, tail


def property_regeneration_times(levels, a=1, confirm=None):
    """Characterization for a = 1: t >= 1 is a regeneration time iff every
    earlier level is strictly below lv[t] and every later observed level is
    at least lv[t] (with the confirmation-window requirement)."""
    assert a == 1
    lv = list(int(x) for x in levels)
    n = len(lv) - 1
    out = []
    for t in range(1, n + 1):
        if all(x < lv[t] for x in lv[:t]) and all(x >= lv[t] for x in lv[t + 1 :]):
            if confirm is None or (n - t) >= confirm:
                out.append(t)
    return out


def property_common_regens(la, lb, confirm=None):
    """Pairs (s, s~) on one common level strictly above the (shared) start,
    reached as a fresh record by each walk, with no later observed dip below
    it; ordered by level."""
    la = list(int(x) for x in la)
    lb = list(int(x) for x in lb)
    assert la[0] == lb[0]
    na, nb = len(la) - 1, len(lb) - 1

    def stance(lv, n, level):
        for t in range(n + 1):
            if lv[t] == level and all(x < level for x in lv[:t]) and all(
                x >= level for x in lv[t + 1 :]
            ):
                if confirm is None or (n - t) >= confirm:
                    return t
                return "censored"
        return None

    pairs = []
    for level in range(la[0] + 1, max(max(la), max(lb)) + 1):
        sa = stance(la, na, level)
        sb = stance(lb, nb, level)
        if sa == "censored" or sb == "censored":
            break
        if sa is not None and sb is not None:
            pairs.append((sa, sb))
    return pairs


def enumerate_level_paths(steps, length):
    """All level sequences from 0 using increments from `steps`."""
    if length == 0:
        yield [0]
        return
    for prefix in enumerate_level_paths(steps, length - 1):
        for s in steps:
            yield prefix + [prefix[-1] + s]


def monte_carlo_renewal_recurrence(durations, probs, n_max, n_samples, seed, p=1):
    """Simulated E B_n^p for a renewal process with i.i.d. durations."""
    rng = np.random.default_rng(seed)
    totals = np.zeros(n_max + 1)
    durations = np.asarray(durations)
    for _ in range(n_samples):
        t = 0
        epochs = [0]
        while t <= n_max + max(durations):
            t += rng.choice(durations, p=probs)
            epochs.append(t)
        epochs = np.asarray(epochs)
        for n in range(n_max + 1):
            nxt = epochs[np.searchsorted(epochs, n)]
            totals[n] += (nxt - n) ** p
    return totals / n_samples


def green_partial_sums(steps, probs, r0, s, window, n_steps):
    """Occupation of window states before absorption, by forward probability
    propagation over n_steps (an increasing lower bound on the Green row)."""
    hi = max(steps)
    ceiling = s + n_steps * max(hi, 0) + 1
    width = ceiling - r0
    dist = np.zeros(width)
    dist[s - r0 - 1] = 1.0
    acc = np.zeros(window)
    for _ in range(n_steps + 1):
        acc += dist[:window]
        nxt = np.zeros(width)
        for step, p in zip(steps, probs):
            if step >= 0:
                nxt[step:] += p * dist[: width - step]
            else:
                nxt[: width + step] += p * dist[-step:]
        dist = nxt
    return acc
