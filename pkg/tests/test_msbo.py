import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fastrates import (Dataset, FqiConfig, GreedyPolicy, MsboConfig, TabularMdp,
                       benchmark_behavior, benchmark_features, build_benchmark, draw_dataset,
                       estimate_regret, fqi_fit, inner_max, make_rng, msbo_fit, one_hot_features,
                       random_tabular, reference_optimal, uniform_pair_behavior, value_iteration)
from fastrates.policy_eval import EvalConfig, ReferenceValueCache
from fastrates.synthetic_benchmark import BenchmarkSpec
from fastrates.theory_bounds import msbo_an

from conftest import deterministic_mdp


def e1(states, actions):
    out = np.zeros((len(states), 2))
    out[:, 0] = 1.0
    return out


def covered(mdp, per_cell, rng):
    S, A = mdp.num_states, mdp.num_actions
    cells = np.repeat(np.arange(S * A), per_cell)
    s, a = cells // A, cells % A
    return Dataset(s, a, mdp.reward(s, a, rng), mdp.transition(s, a, rng))


class TestInnerMax:
    def test_bellman_consistent_q_gives_zero(self, two_state):
        q_star = value_iteration(two_state, tol=1e-14)
        data = covered(two_state, 2, make_rng(0))
        u, val = inner_max(data, one_hot_features(2, 2), q_star.ravel(), 0.5, 10, 0.5, 2)
        assert abs(val) < 1e-20 + 1e-12
        np.testing.assert_allclose(u, 0, atol=1e-12)

    def test_one_sample_hand_solution(self):
        data = Dataset(np.zeros((1, 1)), np.zeros(1, int), np.ones(1), np.zeros((1, 1)))
        u, val = inner_max(data, e1, np.zeros(2), 0.5, 10, 0.0, 1)
        np.testing.assert_allclose(u, [1.0, 0.0], atol=1e-12)
        assert val == pytest.approx(0.5, abs=1e-12)

    def test_doubling_zeta_halves_witness(self):
        mdp = random_tabular(1, 3, 2)
        data = draw_dataset(mdp, uniform_pair_behavior(3, 2), 100, make_rng(2))
        v = make_rng(3).normal(size=6)
        u1, _ = inner_max(data, one_hot_features(3, 2), v, 0.5, 1e9, mdp.gamma, 2)
        u2, _ = inner_max(data, one_hot_features(3, 2), v, 1.0, 1e9, mdp.gamma, 2)
        np.testing.assert_allclose(u2, u1 / 2, rtol=1e-12, atol=1e-15)

    def test_witness_bound_respected(self):
        data = Dataset(np.zeros((1, 1)), np.zeros(1, int), np.ones(1), np.zeros((1, 1)))
        u, val = inner_max(data, e1, np.zeros(2), 0.5, 0.25, 0.0, 1)
        assert np.linalg.norm(u) == pytest.approx(0.25)
        assert val == pytest.approx(0.25 - 0.5 * 0.0625)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2 ** 32), st.floats(0.05, 5.0), st.floats(0.01, 100.0))
    def test_value_nonnegative(self, seed, zeta, bound):
        rng = make_rng(seed)
        mdp = random_tabular(seed % 500, 3, 2)
        data = draw_dataset(mdp, uniform_pair_behavior(3, 2), 30, rng)
        v = rng.normal(size=6) * 3
        _, val = inner_max(data, one_hot_features(3, 2), v, zeta, bound, mdp.gamma, 2)
        assert val >= -1e-10


class TestMsboFit:
    def test_start_at_q_star_returns_immediately(self, two_state):
        q_star = value_iteration(two_state, tol=1e-14).ravel()
        data = covered(two_state, 1, make_rng(0))
        sol = msbo_fit(data, one_hot_features(2, 2), MsboConfig(initial_weights=q_star),
                       two_state.gamma, 2)
        assert sol.iterations_used == 1
        assert sol.final_objective <= 1e-10
        np.testing.assert_allclose(sol.q_weights, q_star)

    def test_noiseless_deterministic_recovery(self):
        mdp = deterministic_mdp([[1, 0, .5], [0, 1, .2], [.3, .3, 0]],
                                [[0, 1, 2], [2, 0, 1], [1, 1, 0]], 0.8)
        data = covered(mdp, 1, make_rng(0))
        sol = msbo_fit(data, one_hot_features(3, 3), MsboConfig(weight_bound=20, witness_bound=20),
                       mdp.gamma, 3)
        q_star = value_iteration(mdp, tol=1e-13)
        assert np.abs(sol.q_weights.reshape(3, 3) - q_star).max() < 1e-8

    def test_noisy_recovery_within_rate(self):
        mdp = random_tabular(4, 3, 2, gamma=0.8)
        n = 6000
        data = draw_dataset(mdp, uniform_pair_behavior(3, 2), n, make_rng(5))
        m_prime = 1 / (1 - mdp.gamma)
        sol = msbo_fit(data, one_hot_features(3, 2),
                       MsboConfig(weight_bound=20, witness_bound=20, outer_steps=100), mdp.gamma, 2)
        err = np.abs(sol.q_weights.reshape(3, 2) - value_iteration(mdp)).max()
        assert err < 10 * msbo_an(n, 6, m_prime, 0.5, 1 / 6)
        assert err < 0.5

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_reported_objective_is_best_over_restarts(self):
        mdp = random_tabular(2, 3, 2)
        data = draw_dataset(mdp, uniform_pair_behavior(3, 2), 60, make_rng(1))
        sol = msbo_fit(data, one_hot_features(3, 2),
                       MsboConfig(restarts=4, outer_steps=30, newton_refine=False, tolerance=0),
                       mdp.gamma, 2)
        assert sol.final_objective == min(sol.restart_objectives)
        assert len(sol.restart_objectives) == 4
        assert np.linalg.norm(sol.q_weights) <= 10 + 1e-9

    def test_non_convergence_warns_but_returns(self):
        mdp = random_tabular(2, 3, 2)
        data = draw_dataset(mdp, uniform_pair_behavior(3, 2), 60, make_rng(1))
        with pytest.warns(RuntimeWarning):
            sol = msbo_fit(data, one_hot_features(3, 2),
                           MsboConfig(restarts=1, outer_steps=2, newton_refine=False,
                                      tolerance=0), mdp.gamma, 2)
        assert not sol.converged and np.isfinite(sol.final_objective)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_deterministic_and_json(self):
        mdp = random_tabular(6, 3, 2)
        data = draw_dataset(mdp, uniform_pair_behavior(3, 2), 80, make_rng(1))
        cfg = MsboConfig(outer_steps=20, restarts=2, seed=11)
        a = msbo_fit(data, one_hot_features(3, 2), cfg, mdp.gamma, 2)
        b = msbo_fit(data, one_hot_features(3, 2), cfg, mdp.gamma, 2)
        assert a.q_weights.tobytes() == b.q_weights.tobytes()
        doc = json.loads(a.to_json(cfg))
        assert set(doc) == {"d", "B", "K", "weights", "zeta", "final_objective", "restarts"}

    def test_objective_at_returned_pair_is_nonnegative(self):
        mdp = random_tabular(8, 4, 2)
        data = draw_dataset(mdp, uniform_pair_behavior(4, 2), 100, make_rng(3))
        sol = msbo_fit(data, one_hot_features(4, 2), MsboConfig(outer_steps=40), mdp.gamma, 2)
        assert sol.final_objective >= -1e-10

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MsboConfig(zeta=0)
        with pytest.raises(ValueError):
            MsboConfig(witness_bound=-1)

    def test_reward_negation_symmetry(self):
        errs, neg_errs = [], []
        for seed in range(8):
            mdp = random_tabular(seed, 3, 2, gamma=0.8)
            neg = TabularMdp(-mdp.reward_table, mdp.transition_table, mdp.initial_dist, mdp.gamma)
            cfg = MsboConfig(weight_bound=20, witness_bound=20, outer_steps=50, restarts=2)
            for m, out in ((mdp, errs), (neg, neg_errs)):
                data = draw_dataset(m, uniform_pair_behavior(3, 2), 400, make_rng(seed))
                sol = msbo_fit(data, one_hot_features(3, 2), cfg, m.gamma, 2)
                out.append(np.abs(sol.q_weights.reshape(3, 2) - value_iteration(m)).max())
        ratio = np.median(neg_errs) / np.median(errs)
        assert 0.5 <= ratio <= 2.0


@pytest.mark.slow
def test_benchmark_regret_comparable_to_fqi():
    mdp = build_benchmark(BenchmarkSpec(seed=9))
    ref = reference_optimal(mdp, benchmark_features, make_rng(77), benchmark_behavior, n=40000)
    ev = EvalConfig(num_initial_states=4000, horizon=50, seed=5)
    cache = ReferenceValueCache(mdp, ref)
    fqi_r, msbo_r = [], []
    for seed in range(30):
        data = draw_dataset(mdp, benchmark_behavior, 512, make_rng(1000 + seed))
        q = fqi_fit(data, benchmark_features, FqiConfig(iterations=50, solver="lstsq"), 0.9, 2)
        fqi_r.append(estimate_regret(mdp, GreedyPolicy(q), ref, ev, cache).regret)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sol = msbo_fit(data, benchmark_features,
                           MsboConfig(weight_bound=1e6, witness_bound=1e6, outer_steps=200,
                                      restarts=2, seed=seed), 0.9, 2)
        msbo_r.append(estimate_regret(mdp, GreedyPolicy(sol.q_function(benchmark_features, 2)),
                                      ref, ev, cache).regret)
    a, b = np.median(fqi_r), np.median(msbo_r)
    assert b <= 3 * max(a, 1e-4) and a <= 3 * max(b, 1e-4)
