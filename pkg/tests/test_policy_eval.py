import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fastrates import (EvalConfig, FqiConfig, GreedyPolicy, TabularMdp, TabularQFunction,
                       benchmark_behavior, benchmark_features, build_benchmark, draw_dataset,
                       estimate_regret, exact_policy_value, fqi_fit, make_rng, mc_policy_value,
                       random_tabular, reference_optimal, value_iteration)
from fastrates.mdp_core import policy_q_values
from fastrates.policy_eval import ReferenceValueCache, truncation_bound
from fastrates.synthetic_benchmark import BenchmarkSpec


def table_policy(actions):
    actions = np.asarray(actions)
    return lambda s: actions[np.asarray(s)]


class TestMcPolicyValue:
    def test_zero_rewards(self):
        mdp = random_tabular(0, 3, 2)
        zero = TabularMdp(np.zeros((3, 2)), mdp.transition_table, mdp.initial_dist, 0.9)
        v, se = mc_policy_value(zero, table_policy([0, 1, 0]), EvalConfig(500, 20, 1))
        assert v == 0 and se == 0

    def test_single_state_geometric_sum(self, single_state):
        v, se = mc_policy_value(single_state, table_policy([0]), EvalConfig(100, 50, 0))
        assert v == pytest.approx((1 - 0.9 ** 50) / (1 - 0.9), abs=1e-12)
        assert se == 0

    def test_deterministic_given_seed(self):
        mdp = random_tabular(1, 4, 2)
        cfg = EvalConfig(300, 30, 9)
        assert mc_policy_value(mdp, table_policy([0, 1, 1, 0]), cfg) == \
            mc_policy_value(mdp, table_policy([0, 1, 1, 0]), cfg)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_brackets_exact_value(self, seed):
        rng = make_rng(seed)
        mdp = random_tabular(seed, 4, 2, gamma=0.8)
        pi = rng.integers(0, 2, 4)
        v, se = mc_policy_value(mdp, table_policy(pi), EvalConfig(2000, 40, seed))
        exact = exact_policy_value(mdp, pi)
        assert abs(v - exact) <= 4 * se + truncation_bound(0.8, 40, 1.0) + 1e-12

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            EvalConfig(10, 0, 0)


class TestTruncation:
    @pytest.mark.parametrize("seed", range(5))
    def test_truncated_value_within_bound(self, seed):
        # the exact truncated value is mu^T sum_{t<H} (gamma P)^t r
        mdp = random_tabular(seed, 5, 2, gamma=0.9)
        pi = np.arange(5) % 2
        P = mdp.transition_table[np.arange(5), pi]
        r = mdp.reward_table[np.arange(5), pi]
        H = 12
        v, acc = np.zeros(5), r.copy()
        for t in range(H):
            v += 0.9 ** t * acc
            acc = P @ acc
        trunc = mdp.initial_dist @ v
        assert abs(trunc - exact_policy_value(mdp, pi)) <= truncation_bound(0.9, H, 1.0)


class TestReference:
    def test_tabular_reference_is_optimal(self):
        mdp = random_tabular(3, 5, 3)
        ref = reference_optimal(mdp)
        q = value_iteration(mdp, tol=1e-12)
        assert np.array_equal(ref.table(5), q.argmax(axis=1))

    def test_single_iteration_is_reward_argmax(self):
        # one round from f0 = 0 regresses the bare rewards, the same as gamma = 0
        mdp = build_benchmark(BenchmarkSpec(seed=9))
        ref = reference_optimal(mdp, benchmark_features, make_rng(0), benchmark_behavior,
                                n=5000, iterations=1)
        data = draw_dataset(mdp, benchmark_behavior, 5000, make_rng(0), behavior_id="reference")
        phi = benchmark_features(data.states, data.actions)
        w = np.linalg.pinv(phi) @ data.rewards
        probe = make_rng(1).random((500, 2))
        ols = np.stack([benchmark_features(probe, np.full(500, a)) @ w for a in (0, 1)], 1)
        assert np.array_equal(ref(probe), ols.argmax(axis=1))

    def test_requires_sampler_for_linear_models(self):
        with pytest.raises(ValueError):
            reference_optimal(build_benchmark())

    @pytest.mark.slow
    def test_independent_references_agree(self):
        mdp = build_benchmark(BenchmarkSpec(seed=9))
        r1 = reference_optimal(mdp, benchmark_features, make_rng(1), benchmark_behavior)
        r2 = reference_optimal(mdp, benchmark_features, make_rng(2), benchmark_behavior)
        probe = make_rng(3).random((10 ** 4, 2))
        assert np.mean(r1(probe) == r2(probe)) >= 0.99


class TestRegret:
    def test_reference_against_itself_is_zero(self):
        mdp = build_benchmark(BenchmarkSpec(seed=9))
        ref = reference_optimal(mdp, benchmark_features, make_rng(0), benchmark_behavior, n=2000,
                                iterations=20)
        est = estimate_regret(mdp, ref, ref, EvalConfig(500, 20, 4))
        assert est.regret == 0.0 and est.std_error == 0.0
        assert est.truncation_bias_bound == pytest.approx(0.9 ** 20 / 0.1)

    def test_cache_gives_identical_estimate(self):
        mdp = build_benchmark(BenchmarkSpec(seed=9))
        ref = reference_optimal(mdp, benchmark_features, make_rng(0), benchmark_behavior, n=2000,
                                iterations=20)
        data = draw_dataset(mdp, benchmark_behavior, 64, make_rng(5))
        pol = GreedyPolicy(fqi_fit(data, benchmark_features, FqiConfig(solver="lstsq"), 0.9, 2))
        cfg = EvalConfig(500, 20, 4)
        cache = ReferenceValueCache(mdp, ref)
        assert estimate_regret(mdp, pol, ref, cfg) == estimate_regret(mdp, pol, ref, cfg, cache)
        assert estimate_regret(mdp, pol, ref, cfg, cache).std_error >= 0

    @pytest.mark.parametrize("seed", range(5))
    def test_anti_optimal_gap_matches_exact(self, seed):
        mdp = random_tabular(seed, 4, 3)
        q = value_iteration(mdp, tol=1e-13)
        ref = reference_optimal(mdp)
        worst = GreedyPolicy(TabularQFunction(-q))
        est = estimate_regret(mdp, worst, ref, EvalConfig())
        anti = q.argmin(axis=1)
        # oracle: mu^T (V* - V^anti) with V^anti from the policy's own Q-values
        v_anti = policy_q_values(mdp, anti)[np.arange(4), anti]
        gap = mdp.initial_dist @ (q.max(axis=1) - v_anti)
        assert est.regret == pytest.approx(gap, abs=1e-10)
        assert est.std_error == 0.0
