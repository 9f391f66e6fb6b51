"""Lab experiments: estimators, controls with known exponents, and the
quenched CLT diagnostic on the closed-form model."""

import math

import numpy as np
import pytest

import rwrelab as rw
from rwrelab.lab.config import ConfigError, config_from_dict
from rwrelab.lab.experiments import (
    clt_experiment,
    coupling_experiment,
    estimate_model,
    hyperplane_direction,
    intersection_experiment,
    mu_samples,
    quenched_mean_variance,
    synthetic_ballistic_variance,
    tau1_samples,
    transition_counts,
)
from rwrelab.lab.parallel import parallel_map, split_indices
from rwrelab.stats import InsufficientDataError


class TestParallel:
    def test_order_preserved(self):
        items = list(range(23))
        assert parallel_map(lambda x: x * x, items, threads=4) == [x * x for x in items]

    def test_split_indices_cover(self):
        parts = split_indices(10, 3)
        assert [i for r in parts for i in r] == list(range(10))
        assert split_indices(0, 3) == []


class TestVariance:
    def test_homogeneous_zero_within_noise(self):
        res = quenched_mean_variance(rw.e1e2_half_half(), [16, 32, 64, 128], 40, 8, 3)
        for v, s in zip(res.v_hat, res.se):
            assert v <= 3 * s + 1e-12

    def test_synthetic_ballistic_slope_two(self):
        res = synthetic_ballistic_variance([16, 32, 64, 128, 256], 200, 64, 9)
        assert abs(res.fit.slope - 2.0) < 0.1

    def test_walks_must_be_even(self):
        with pytest.raises(ValueError):
            quenched_mean_variance(rw.benchmark_a(), [16, 32, 64, 128], 10, 5, 1)

    def test_deterministic_in_threads(self):
        kw = dict(n_grid=[16, 32, 64, 128], n_env=24, walks_per_env=8, master_seed=5)
        a = quenched_mean_variance(rw.benchmark_a(), threads=1, **kw)
        b = quenched_mean_variance(rw.benchmark_a(), threads=4, **kw)
        assert a.v_hat == b.v_hat and a.se == b.se


class TestIntersections:
    def test_deterministic_identical_slope_one(self):
        res = intersection_experiment(rw.deterministic_e1(), [8, 16, 32, 64], 4, 1)
        assert res.means == (8.0, 16.0, 32.0, 64.0)
        assert res.fit.slope == pytest.approx(1.0, abs=1e-9)

    def test_benchmark_sublinear_smoke(self):
        res = intersection_experiment(rw.benchmark_a(), [32, 64, 128, 256], 64, 2, threads=2)
        assert res.fit.ci_high < 1.0


class TestTails:
    def test_tau1_samples_positive(self):
        t = tau1_samples(rw.benchmark_a(), 400, 3, confirm=128)
        assert t.shape == (400,) and np.all(t >= 1)

    def test_mu_samples_reduce_to_tau_on_micro(self):
        # the micro model regenerates at every step: first pair is (1, 1)
        m = mu_samples(rw.micro_model(), 50, 1, confirm=16)
        assert np.all(m == 1)


class TestClt:
    # closed-form inputs isolate the diagnostic machinery; the acceptance
    # suite exercises the full estimated pipeline on the benchmark model
    V_EXACT = np.array([0.5, 0.5])
    D_EXACT = np.array([[0.25, -0.25], [-0.25, 0.25]])

    def test_e1e2_degenerate_direction_collapses(self):
        model = rw.e1e2_half_half()
        res = clt_experiment(model, 0, 1024, 4000, self.V_EXACT, self.D_EXACT, 7)
        deg = [d for d in res.directions if d.kind == "degenerate"]
        assert len(deg) == 1
        assert deg[0].empirical_var < 1e-12  # the projection is deterministic
        coords = [d for d in res.directions if d.kind == "coordinate"]
        assert all(d.p_value is not None and d.p_value > 0.01 for d in coords)

    def test_quenched_variance_matches_target(self):
        model = rw.e1e2_half_half()
        res = clt_experiment(model, 1, 1024, 4000, self.V_EXACT, self.D_EXACT, 8)
        for d in res.directions:
            if d.kind == "coordinate":
                assert abs(d.empirical_var - d.variance_target) < 0.03

    def test_estimated_inputs_still_reasonable(self):
        model = rw.e1e2_half_half()
        est = estimate_model(model, 1, n_paths=8, n_steps=16384, confirm=64)
        res = clt_experiment(model, 0, 1024, 4000, est.v_hat, est.d_hat, 7)
        coords = [d for d in res.directions if d.kind == "coordinate"]
        assert all(d.p_value is not None and d.p_value > 1e-4 for d in coords)


class TestCoupling:
    def test_hyperplane_direction(self):
        w = hyperplane_direction((1, 0))
        assert int(np.dot(w, (1, 0))) == 0 and np.any(w != 0)
        w2 = hyperplane_direction((2, 3))
        assert int(np.dot(w2, (2, 3))) == 0
        assert math.gcd(*[int(abs(c)) for c in w2]) == 1

    def test_micro_coupling_perfect_at_distance(self):
        # distinct sites: the two transition laws coincide, so the coupled
        # pair should rarely disagree far from the origin
        res = coupling_experiment(rw.micro_model(), [4], 60, 3, confirm=16)
        assert res.points[0].p_hat <= 0.2
        assert res.points[0].mechanism_violations == 0

    def test_benchmark_decay_smoke(self):
        res = coupling_experiment(rw.benchmark_a(), [2, 8], 120, 11, confirm=96, threads=2)
        p = [pt.p_hat for pt in res.points]
        assert p[0] > p[1]
        assert all(pt.mechanism_violations == 0 for pt in res.points)


class TestTransitionCounts:
    def test_counts_sum(self):
        counts = transition_counts(rw.micro_model(), [0, 0], 500, 2, confirm=16)
        assert sum(counts.values()) == 500


class TestConfig:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="banana"):
            config_from_dict({"experiment": "variance", "banana": 1})

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError, match="experiment"):
            config_from_dict({"experiment": "nope"})

    def test_n_grid_must_increase(self):
        with pytest.raises(ConfigError, match="n_grid"):
            config_from_dict({"experiment": "variance", "n_grid": [8, 8]})

    def test_hash_stable(self):
        a = config_from_dict({"experiment": "variance", "master_seed": 1})
        b = config_from_dict({"experiment": "variance", "master_seed": 1})
        assert a.config_hash() == b.config_hash()
        c = config_from_dict({"experiment": "variance", "master_seed": 2})
        assert a.config_hash() != c.config_hash()
