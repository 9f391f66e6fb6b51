"""Half-line Green functions, forward recurrence times, and chain
experiments against closed forms and independent oracles."""

import math
from fractions import Fraction

import numpy as np
import pytest

from rwrelab.renewal import (
    BoxExitResult,
    GreenConvergenceError,
    OneDimWalk,
    box_exit_experiment,
    forward_recurrence,
    halfline_green,
    occupation_experiment,
    recurrence_partial_sums,
    simulate_green_counts,
    symmetric_walk,
)

from oracles import green_partial_sums, monte_carlo_renewal_recurrence

SIMPLE = OneDimWalk([1, -1], [0.5, 0.5])

RANDOM_SYMMETRIC = [
    symmetric_walk({1: 0.3, 2: 0.15, 3: 0.05}),
    symmetric_walk({1: 0.25, 3: 0.25}),
    symmetric_walk({1: 0.2, 2: 0.2}, hold=0.2),
]


class TestGreen:
    def test_simple_walk_closed_form(self):
        table = halfline_green(SIMPLE, r0=0, window=12)
        for s in range(1, 13):
            for t in range(1, 13):
                assert table.g(s, t) == pytest.approx(2 * min(s, t), abs=1e-9)

    def test_absorbed_start_is_zero(self):
        table = halfline_green(SIMPLE, r0=0, window=4)
        assert table.g(0, 1) == 0.0
        assert table.g(-3, 2) == 0.0

    def test_symmetry_of_symmetric_walks(self):
        for walk in RANDOM_SYMMETRIC:
            table = halfline_green(walk, r0=0, window=10)
            assert np.max(np.abs(table.values - table.values.T)) < 1e-9

    def test_nonzero_r0(self):
        table = halfline_green(SIMPLE, r0=5, window=8)
        for s in range(6, 14):
            for t in range(6, 14):
                assert table.g(s, t) == pytest.approx(2 * min(s - 5, t - 5), abs=1e-9)

    def test_partial_sum_oracle_converges_from_below(self):
        # forward propagation over n steps is an increasing lower bound whose
        # gap to the solved values shrinks like a recurrent-walk tail
        for walk in RANDOM_SYMMETRIC[:2]:
            table = halfline_green(walk, r0=0, window=6)
            solved = table.values[2]
            gap = {}
            for n in (1000, 4000):
                acc = green_partial_sums(walk.steps, walk.probs, 0, 3, 6, n)
                assert np.all(acc <= solved + 1e-9)
                gap[n] = solved - acc
            assert np.all(gap[4000] < gap[1000])
            assert np.max(gap[4000]) < 0.2
            # tail ~ C/sqrt(n): one Richardson step should land much closer
            extrapolated = solved - gap[4000] + (gap[1000] - gap[4000])
            assert np.max(np.abs(extrapolated - solved)) < 0.02

    def test_monte_carlo_agreement(self):
        for i, walk in enumerate(RANDOM_SYMMETRIC):
            table = halfline_green(walk, r0=0, window=8)
            start = 3
            mean, se = simulate_green_counts(walk, 0, start, 8, 30_000, seed=100 + i)
            solved = table.values[start - 1]
            z = np.abs(mean - solved) / np.maximum(se, 1e-12)
            assert float(z.max()) < 4.0, (walk.steps, z.max())

    def test_visit_bound_linear_in_min(self):
        # fitted-constant form of the classical bound: g <= C (1 + min(s,t)-1)
        for walk in RANDOM_SYMMETRIC:
            table = halfline_green(walk, r0=0, window=16)
            ratios = np.empty((16, 16))
            for i in range(16):
                for j in range(16):
                    ratios[i, j] = table.values[i, j] / (1 + min(i, j))
            c_fit = ratios[:8, :8].max()
            assert np.all(ratios <= c_fit * (1 + 1e-6)), walk.steps

    def test_rejects_rightward_only_walk(self):
        with pytest.raises(ValueError):
            halfline_green(OneDimWalk([1, 2], [0.5, 0.5]), 0, 4)

    def test_nonconvergence_signalled(self):
        # a max_ceiling too small to allow even one refinement step
        with pytest.raises(GreenConvergenceError):
            halfline_green(SIMPLE, 0, 4, ceiling=70, max_ceiling=100)

    def test_updrift_walk_still_converges(self):
        # transient-upward walks have finite expected visits; the clamped
        # ceiling's extra returns vanish as the ceiling grows
        drifting = OneDimWalk([2, -1], [0.7, 0.3])
        table = halfline_green(drifting, 0, 4)
        assert np.all(table.values >= 0) and np.isfinite(table.values).all()

    def test_ceiling_validation(self):
        with pytest.raises(ValueError):
            halfline_green(SIMPLE, 0, 10, ceiling=8)


class TestForwardRecurrence:
    def test_constant_two(self):
        vals = forward_recurrence({2: 1.0}, 6)
        assert vals[3] == 1 and vals[4] == 0 and vals[5] == 1 and vals[0] == 0

    def test_constant_one(self):
        assert all(v == 0 for v in forward_recurrence({1: 1.0}, 20))

    def test_exact_enumeration_small_laws(self):
        # independent oracle: renewal-epoch mass function u(t), then
        # P(B_n = b) = u(n) for b = 0 and sum_t u(t) P(Y = n + b - t) else
        laws = [
            {1: Fraction(1, 2), 2: Fraction(1, 2)},
            {1: Fraction(1, 3), 2: Fraction(1, 3), 3: Fraction(1, 3)},
            {2: Fraction(2, 5), 3: Fraction(1, 5), 4: Fraction(2, 5)},
            {1: Fraction(1, 10), 4: Fraction(9, 10)},
        ]
        for law in laws:
            for p in (1, 2):
                got = forward_recurrence(law, 20, p=p)
                want = _oracle_recurrence(law, 20, p)
                assert got == want, (law, p)

    def test_bound_by_tail_sums(self):
        laws = [{1: 0.25, 2: 0.5, 3: 0.25}, {2: 0.9, 5: 0.1}]
        for law in laws:
            vals = forward_recurrence(law, 50)
            bound = recurrence_partial_sums(law, 50)[-1]
            assert max(vals) <= bound + 1e-12

    def test_uniform_123_matches_monte_carlo(self):
        law = {1: 1 / 3, 2: 1 / 3, 3: 1 / 3}
        vals = np.asarray(forward_recurrence(law, 50), dtype=float)
        mc = monte_carlo_renewal_recurrence([1, 2, 3], [1 / 3] * 3, 50, 4000, seed=5)
        se = 1.2 / math.sqrt(4000)  # B_n <= 2 here, crude bound on the sd
        assert np.max(np.abs(vals - mc)) < 4 * se

    def test_rejects_nonpositive_durations(self):
        with pytest.raises(ValueError):
            forward_recurrence({0: 0.5, 1: 0.5}, 5)


def _oracle_recurrence(law, n_max, p):
    ymax = max(law)
    u = [Fraction(0)] * (n_max + ymax + 1)
    u[0] = Fraction(1)
    for t in range(1, len(u)):
        u[t] = sum(law.get(k, 0) * u[t - k] for k in range(1, min(t, ymax) + 1))
    out = []
    for n in range(n_max + 1):
        val = Fraction(0)
        for b in range(1, ymax + 1):
            mass = sum(u[t] * law.get(n + b - t, 0) for t in range(n))
            val += Fraction(b) ** p * mass
        out.append(val)
    return out


class _DriftChain:
    """Deterministic chain stepping one unit along e2 per step."""

    def __init__(self):
        self.calls = 0

    def __call__(self, xs, round_key):
        self.calls += 1
        out = xs.copy()
        out[:, 1] += 1
        return out


class TestChainExperiments:
    def test_occupation_zero_scale(self):
        res = occupation_experiment(_DriftChain(), 2, 1.0, 0.0, [4, 8, 16, 32], 3)
        assert all(v == 0 for v in res.sums)
        assert res.fit.degenerate

    def test_occupation_drifting_chain_bounded(self):
        alpha = 1.0
        res = occupation_experiment(_DriftChain(), 2, alpha, 1.0, [4, 8, 16, 32], 2)
        bound = 1.0 / (1.0 - math.exp(-alpha))
        assert res.sums[-1] <= bound
        assert res.sums == tuple(sorted(res.sums))

    def test_box_exit_start_outside(self):
        res = box_exit_experiment(_DriftChain(), 2, 3, (0, 9), 5)
        assert res.mean_steps == 0.0 and res.cap_hits == 0

    def test_box_exit_deterministic_exit_time(self):
        res = box_exit_experiment(_DriftChain(), 2, 3, (0, 0), 4, step_cap=64)
        assert res.mean_steps == 4.0 and res.q50 == 4.0 and res.cap_hits == 0

    def test_box_exit_cap_hit_reported(self):
        frozen = lambda xs, k: xs
        res = box_exit_experiment(frozen, 2, 2, (0, 0), 3, step_cap=16)
        assert res.cap_hits == 3 and res.mean_steps == 16.0

    def test_box_exit_r_zero(self):
        # r = 0: the box is the single cell at the origin
        res = box_exit_experiment(_DriftChain(), 2, 0, (0, 0), 4, step_cap=8)
        assert res.mean_steps == 1.0 and res.cap_hits == 0
        frozen = lambda xs, k: xs  # chain degenerate at 0: cap hits reported
        res2 = box_exit_experiment(frozen, 2, 0, (0, 0), 4, step_cap=8)
        assert res2.cap_hits == 4
