"""Monte-Carlo and exact policy values, the reference optimal policy, regret."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data_gen import draw_dataset
from .fqi import FqiConfig, GreedyPolicy, TabularQFunction, fqi_fit
from .mdp_core import TabularMdp, discounted_returns, exact_policy_value, value_iteration
from .synthetic_benchmark import make_rng


@dataclass(frozen=True)
class EvalConfig:
    num_initial_states: int = 40000
    horizon: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 1 or self.num_initial_states < 1:
            raise ValueError("horizon and num_initial_states must be positive")


@dataclass(frozen=True)
class RegretEstimate:
    v_star_hat: float
    v_pi_hat: float
    regret: float
    std_error: float
    truncation_bias_bound: float


def truncation_bound(gamma: float, horizon: int, reward_bound: float) -> float:
    return gamma ** horizon * reward_bound / (1 - gamma)


def _rollout_returns(mdp, policy, config: EvalConfig) -> np.ndarray:
    # one shared stream: initial states first, then transitions step by step,
    # so two policies evaluated with the same config see common random numbers
    rng = make_rng(config.seed)
    states = mdp.initial_states(rng, config.num_initial_states)
    return discounted_returns(mdp, policy, states, config.horizon, rng)


def _mean_and_se(x: np.ndarray):
    m = len(x)
    mean = float(math.fsum(x) / m)
    se = float(np.std(x, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return mean, se


def mc_policy_value(mdp, policy, config: EvalConfig):
    """Mean truncated discounted return over fresh initial states and its standard error."""
    return _mean_and_se(_rollout_returns(mdp, policy, config))


def reference_optimal(mdp, feature_map=None, rng=None, behavior=None, n: int = 40000,
                      iterations: int = 100, ball_radius: float = 1e6,
                      solver: str = "lstsq") -> GreedyPolicy:
    """Stand-in for the optimal policy.

    Tabular models are solved exactly by value iteration.  Otherwise FQI is
    run with a large iteration budget on a fresh dataset of size ``n``, by
    default with minimum-norm least squares so that feature maps with a
    built-in linear dependence still give a fit.
    """
    if isinstance(mdp, TabularMdp):
        return GreedyPolicy(TabularQFunction(value_iteration(mdp, tol=1e-12)))
    if feature_map is None or behavior is None or rng is None:
        raise ValueError("feature_map, behavior and rng are required for sampled models")
    data = draw_dataset(mdp, behavior, n, rng, behavior_id="reference")
    q = fqi_fit(data, feature_map, FqiConfig(iterations=iterations, ball_radius=ball_radius,
                                          solver=solver),
                mdp.gamma, mdp.num_actions)
    return GreedyPolicy(q)


def tabular_policy_table(policy, num_states: int) -> np.ndarray:
    return np.asarray(policy(np.arange(num_states)), dtype=int)


class ReferenceValueCache:
    """Caches the reference policy's Monte-Carlo returns per evaluation config."""

    def __init__(self, mdp, reference):
        self.mdp = mdp
        self.reference = reference
        self._returns = {}

    def returns(self, config: EvalConfig) -> np.ndarray:
        if config not in self._returns:
            self._returns[config] = _rollout_returns(self.mdp, self.reference, config)
        return self._returns[config]


def estimate_regret(mdp, policy, reference, config: EvalConfig,
                    cache: ReferenceValueCache | None = None) -> RegretEstimate:
    """Regret of ``policy`` relative to ``reference``.

    Tabular models use exact values.  Sampled models use paired rollouts from
    the same initial states and random stream, so the regret standard error is
    that of the per-rollout differences.
    """
    if isinstance(mdp, TabularMdp):
        S = mdp.num_states
        v_star = exact_policy_value(mdp, tabular_policy_table(reference, S))
        v_pi = exact_policy_value(mdp, tabular_policy_table(policy, S))
        return RegretEstimate(v_star, v_pi, v_star - v_pi, 0.0, 0.0)
    if cache is not None:
        ref_returns = cache.returns(config)
    else:
        ref_returns = _rollout_returns(mdp, reference, config)
    pol_returns = _rollout_returns(mdp, policy, config)
    v_star, _ = _mean_and_se(ref_returns)
    v_pi, _ = _mean_and_se(pol_returns)
    diff = ref_returns - pol_returns
    regret, se = _mean_and_se(diff)
    bias = truncation_bound(mdp.gamma, config.horizon, mdp.reward_bound)
    return RegretEstimate(v_star, v_pi, regret, se, bias)
