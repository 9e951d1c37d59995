import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fastrates import (BenchmarkSpec, benchmark_features, build_benchmark, make_rng,
                       random_tabular)

unit = st.floats(0.0, 1.0)


class TestFeatures:
    def test_origin_action0(self):
        np.testing.assert_array_equal(benchmark_features([0.0, 0.0], 0),
                                      [0, 0, 0.5, 0, 0, 0.5])

    def test_corner_action1(self):
        np.testing.assert_array_equal(benchmark_features([1.0, 1.0], 1),
                                      [0, 0.5, 0, 0, 0.5, 0])

    @given(unit, unit, st.sampled_from([0, 1]))
    def test_simplex(self, s1, s2, a):
        phi = benchmark_features([s1, s2], a)
        assert np.all(phi >= 0)
        assert phi.sum() == pytest.approx(1.0, abs=1e-15)
        assert np.linalg.norm(phi) <= 1.0

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            benchmark_features([1.2, 0.5], 0)
        with pytest.raises(ValueError):
            benchmark_features([0.2, 0.5], 2)

    def test_batch_shape(self):
        s = make_rng(0).random((7, 2))
        assert benchmark_features(s, np.ones(7, int)).shape == (7, 6)


class TestBuildBenchmark:
    def test_deterministic(self):
        a, b = build_benchmark(BenchmarkSpec(seed=3)), build_benchmark(BenchmarkSpec(seed=3))
        assert a.theta.tobytes() == b.theta.tobytes()
        assert a.alphas.tobytes() == b.alphas.tobytes()
        assert a.betas.tobytes() == b.betas.tobytes()

    def test_draw_order(self):
        u = make_rng(0).random(30)
        mdp = build_benchmark(BenchmarkSpec(seed=0))
        np.testing.assert_array_equal(mdp.theta, u[:6])
        assert mdp.alphas[0, 0] == u[6] and mdp.betas[0, 0] == u[7]
        assert mdp.alphas[0, 1] == u[8] and mdp.betas[0, 1] == u[9]
        assert mdp.alphas[1, 0] == u[10]
        assert mdp.betas[5, 1] == u[29]

    def test_rewards_in_unit_interval(self):
        mdp = build_benchmark()
        s = make_rng(1).random((1000, 2))
        r = mdp.reward(s, make_rng(2).integers(2, size=1000))
        assert np.all((r >= 0) & (r <= 1))

    def test_next_states_in_square(self):
        mdp = build_benchmark()
        rng = make_rng(4)
        s = rng.random((5000, 2))
        sp = mdp.transition(s, rng.integers(2, size=5000), rng)
        assert sp.shape == (5000, 2)
        assert np.all((sp >= 0) & (sp <= 1))

    def test_mixture_mean_matches_beta_identity(self):
        mdp = build_benchmark(BenchmarkSpec(seed=0))
        rng = make_rng(5)
        s = np.array([[0.3, 0.8]])
        m = 10 ** 6
        sp = mdp.transition(np.repeat(s, m, axis=0), np.ones(m, int), rng)
        se = sp.std(axis=0) / np.sqrt(m)
        expected = mdp.mean_next_state(s, np.array([1]))[0]
        assert np.all(np.abs(sp.mean(axis=0) - expected) <= 3 * se)

    def test_bellman_image_is_linear_in_features(self):
        # T f for linear f regressed on phi at random (s, a): residual within MC error
        mdp = build_benchmark(BenchmarkSpec(seed=0))
        rng = make_rng(6)
        w = rng.standard_normal(6)
        pts = rng.random((100, 2))
        acts = rng.integers(2, size=100)
        m = 20000
        backups, ses = [], []
        for s, a in zip(pts, acts):
            sp = mdp.transition(np.repeat(s[None], m, axis=0), np.full(m, a), rng)
            v = np.maximum(benchmark_features(sp, np.zeros(m, int)) @ w,
                           benchmark_features(sp, np.ones(m, int)) @ w)
            backups.append(mdp.reward(s[None], np.array([a]))[0] + mdp.gamma * v.mean())
            ses.append(mdp.gamma * v.std() / np.sqrt(m))
        X = benchmark_features(pts, acts)
        y = np.array(backups)
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ coef
        assert np.max(np.abs(resid)) < 5 * max(ses)

    def test_dump_params(self):
        import json
        doc = json.loads(build_benchmark(BenchmarkSpec(seed=2, gamma=0.8)).dump_params())
        assert doc["seed"] == 2 and doc["gamma"] == 0.8
        assert len(doc["theta"]) == 6 and np.shape(doc["alpha"]) == (6, 2)

    def test_gamma_validated(self):
        with pytest.raises(ValueError):
            BenchmarkSpec(gamma=1.0)

    def test_reward_noise_option(self):
        mdp = build_benchmark(BenchmarkSpec(reward_noise_sd=0.1))
        s = make_rng(0).random((2000, 2))
        a = np.zeros(2000, int)
        r = mdp.reward(s, a, make_rng(1))
        assert np.all(np.abs(r) <= 1.0)
        assert np.std(r - mdp.reward(s, a)) > 0.05


class TestRandomTabular:
    def test_single_state(self):
        mdp = random_tabular(0, 1, 3)
        np.testing.assert_array_equal(mdp.transition_table, np.ones((1, 3, 1)))

    def test_same_seed_same_mdp(self):
        a, b = random_tabular(9, 4, 2), random_tabular(9, 4, 2)
        assert a.to_json() == b.to_json()

    def test_high_concentration_rows_near_uniform(self):
        mdp = random_tabular(1, 10, 2, dirichlet_concentration=1e4)
        assert np.max(np.abs(mdp.transition_table - 0.1)) < 0.05

    def test_rewards_bounded(self):
        mdp = random_tabular(2, 6, 3, reward_bound=2.5)
        assert np.all(np.abs(mdp.reward_table) <= 2.5)
        np.testing.assert_allclose(mdp.initial_dist, 1 / 6)
