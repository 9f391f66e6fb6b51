"""Regeneration detection against brute-force oracles, and the slab
estimators against closed forms."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import rwrelab as rw
from rwrelab.env import Environment, StepDistribution, Homogeneous, EnvironmentModel
from rwrelab.regen import (
    degeneracy_check,
    detect_regenerations,
    estimate_diffusion,
    estimate_velocity,
    slabs,
    tail_fit,
)
from rwrelab.stats import InsufficientDataError
from rwrelab.walk import RngStream, path_from_levels, simulate

from oracles import (
    enumerate_level_paths,
    naive_regeneration_times,
    property_regeneration_times,
)


class TestDetection:
    def test_deterministic_with_confirm_window(self):
        p = path_from_levels(list(range(21)))
        rec = detect_regenerations(p, 1, confirm_horizon=8)
        assert rec.times.tolist() == list(range(1, 13))
        assert rec.censored_tail and rec.tail_candidate == 13

    def test_hand_trace_after_backtrack(self):
        # levels 0,1,-1,0,1,2,3: the time-1 candidate is spoiled by the dip
        # to -1; the next candidate is the first fresh record at level
        # (max level by the dip) + 1 = 2, reached at time 5.
        rec = detect_regenerations(path_from_levels([0, 1, -1, 0, 1, 2, 3]), 1, None)
        assert rec.times.tolist() == [5, 6]

    def test_strictly_increasing_levels_all_regens(self):
        env = Environment(rw.e1e2_half_half(), 4)
        path = simulate(env, (0, 0), 200, RngStream(5))
        rec = detect_regenerations(path, 1, None)
        assert rec.times.tolist() == list(range(1, 201))

    def test_a_parameter(self):
        p = path_from_levels(list(range(0, 13)))
        rec = detect_regenerations(p, a=3, confirm_horizon=None)
        assert rec.times.tolist() == [3, 6, 9, 12]

    def test_exhaustive_oracle_equivalence_small(self):
        # all +-1 level paths of length <= 9 here; the acceptance suite
        # extends to length 12
        for n in range(1, 10):
            for lv in enumerate_level_paths((1, -1), n):
                rec = detect_regenerations(path_from_levels(lv), 1, None)
                times, _, _ = naive_regeneration_times(lv, 1, None)
                prop = property_regeneration_times(lv, 1, None)
                assert rec.times.tolist() == times == prop, lv

    def test_oracle_equivalence_with_confirm_and_a(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            lv = np.concatenate([[0], rng.choice([1, -1, 2], size=14)]).cumsum()
            for a in (1, 2):
                for confirm in (None, 3, 6):
                    rec = detect_regenerations(path_from_levels(lv), a, confirm)
                    times, cens, tail = naive_regeneration_times(lv, a, confirm)
                    assert rec.times.tolist() == times, (lv, a, confirm)
                    assert rec.censored_tail == cens
                    assert rec.tail_candidate == tail

    @given(st.lists(st.sampled_from([1, -1]), min_size=1, max_size=40),
           st.sampled_from([2, 5, None]))
    @settings(max_examples=60, deadline=None)
    def test_censoring_monotonicity(self, incs, confirm):
        lv = np.concatenate([[0], np.cumsum(incs)])
        p = path_from_levels(lv)
        small = detect_regenerations(p, 1, confirm)
        wider = detect_regenerations(p, 1, None)
        # a larger horizon never adds a time a smaller one rejected for cause
        assert set(small.times.tolist()) <= set(wider.times.tolist())

    def test_uncensored_invariant(self):
        path = simulate(Environment(rw.benchmark_a(), 3), (0, 0), 3000, RngStream(2))
        rec = detect_regenerations(path, 1, 128)
        lv = path.levels
        for t in rec.times:
            assert np.all(lv[:t] < lv[t]) and np.all(lv[t:] >= lv[t])


class TestSlabs:
    def test_deterministic_slabs(self):
        p = path_from_levels(list(range(10)))
        rec = detect_regenerations(p, 1, None)
        sl = slabs(p, rec)
        assert all(s.duration == 1 for s in sl)
        assert [s.index for s in sl] == list(range(len(sl)))

    def test_too_few_times_empty(self):
        p = path_from_levels([0, 1])
        rec = detect_regenerations(p, 1, None)
        assert rec.times.size == 1
        assert slabs(p, rec) == []

    def test_displacement_level_gain_at_least_a(self):
        path = simulate(Environment(rw.benchmark_a(), 8), (0, 0), 4000, RngStream(9))
        for a in (1, 2):
            rec = detect_regenerations(path, a, 256)
            for s in slabs(path, rec):
                if s.index >= 1:
                    assert int(np.dot(s.displacement, (1, 0))) >= a

    def test_lag1_autocorrelation_of_durations(self):
        path = simulate(Environment(rw.benchmark_a(), 12), (0, 0), 100_000, RngStream(1))
        rec = detect_regenerations(path, 1, 512)
        dur = np.asarray([s.duration for s in slabs(path, rec) if s.index >= 1], float)
        x, y = dur[:-1] - dur.mean(), dur[1:] - dur.mean()
        r = float((x * y).mean() / dur.var())
        assert abs(r) < 2.58 / math.sqrt(dur.size)  # 99% CI around 0


class TestEstimators:
    def test_identical_slabs(self):
        p = path_from_levels(list(range(40)))
        sl = slabs(p, detect_regenerations(p, 1, None))
        est = estimate_velocity(sl)
        assert np.allclose(est.se, 0)
        dif = estimate_diffusion(sl, est.v_hat)
        assert np.allclose(dif.d_hat, 0)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            estimate_velocity([])

    def test_e1e2_closed_form(self):
        env = Environment(rw.e1e2_half_half(), 6)
        path = simulate(env, (0, 0), 20_000, RngStream(7))
        sl = slabs(path, detect_regenerations(path, 1, 64))
        est = estimate_velocity(sl)
        assert np.all(np.abs(est.v_hat - 0.5) < 3 * est.se + 1e-12)
        dif = estimate_diffusion(sl, est.v_hat)
        target = np.array([[0.25, -0.25], [-0.25, 0.25]])
        assert np.max(np.abs(dif.d_hat - target)) < 0.02

    def test_homogeneous_iid_step_consistency(self):
        # Homogeneous backtracking model: slab estimators must recover the
        # plain i.i.d.-walk mean and CLT covariance.
        sd = StepDistribution([(1, 0), (-1, 0), (0, 1), (0, -1)], [0.5, 0.1, 0.2, 0.2])
        model = EnvironmentModel(d=2, u_hat=(1, 0), delta=0.2, s0=1.0, m_bound=1.0,
                                 kappa=0.3, family=Homogeneous(sd))
        env = Environment(model, 10)
        path = simulate(env, (0, 0), 200_000, RngStream(3))
        sl = slabs(path, detect_regenerations(path, 1, 512))
        est = estimate_velocity(sl)
        v = np.array([0.4, 0.0])
        assert np.all(np.abs(est.v_hat - v) < 4 * est.se), (est.v_hat, est.se)
        dif = estimate_diffusion(sl, est.v_hat)
        ex2 = np.diag([0.6, 0.4])
        target = ex2 - np.outer(v, v)
        assert np.all(np.abs(dif.d_hat - target) < 4 * dif.se + 0.01), dif.d_hat

    def test_diffusion_psd(self):
        path = simulate(Environment(rw.benchmark_a(), 2), (0, 0), 30_000, RngStream(5))
        sl = slabs(path, detect_regenerations(path, 1, 256))
        est = estimate_velocity(sl)
        dif = estimate_diffusion(sl, est.v_hat)
        eigs = np.linalg.eigvalsh(dif.d_hat)
        assert eigs.min() >= -1e-9 * np.trace(dif.d_hat)


class TestDegeneracy:
    def test_e1e2_degenerate_direction(self):
        model = rw.e1e2_half_half()
        d = np.array([[0.25, -0.25], [-0.25, 0.25]])
        rep = degeneracy_check(model, d)
        assert rep.span_basis.shape[0] == 1
        assert rep.orthogonal_dirs.shape == (1, 2)
        u = rep.orthogonal_dirs[0]
        assert np.allclose(np.abs(u), [math.sqrt(0.5)] * 2)
        assert abs(rep.quad_forms[0]) < 1e-12

    def test_deterministic_model_all_degenerate(self):
        model = rw.deterministic_e1()
        rep = degeneracy_check(model, np.zeros((2, 2)))
        assert rep.span_basis.shape[0] == 0
        assert rep.orthogonal_dirs.shape == (2, 2)
        assert np.allclose(rep.quad_forms, 0)

    def test_benchmark_full_span(self):
        model = rw.benchmark_a()
        rep = degeneracy_check(model, np.eye(2))
        assert rep.span_basis.shape[0] == 2
        assert rep.orthogonal_dirs.shape[0] == 0


class TestTailFit:
    def test_degenerate_constant_sample(self):
        fit = tail_fit(np.full(100, 7.0))
        assert fit.degenerate and math.isinf(fit.rate)

    def test_geometric_rate(self):
        rng = np.random.default_rng(3)
        sample = rng.geometric(0.5, size=10_000)
        fit = tail_fit(sample, seed=1)
        assert fit.ci_low < math.log(2) < fit.ci_high
        assert abs(fit.rate - math.log(2)) < 0.05

    def test_requires_samples(self):
        with pytest.raises(InsufficientDataError):
            tail_fit(np.arange(10))

    def test_benchmark_tau_tail_positive(self):
        path = simulate(Environment(rw.benchmark_a(), 14), (0, 0), 60_000, RngStream(4))
        rec = detect_regenerations(path, 1, 256)
        gaps = np.diff(rec.times)
        fit = tail_fit(gaps, seed=2)
        assert fit.rate > 0 and fit.ci_low > 0
