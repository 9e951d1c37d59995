"""The two-dimensional Beta-mixture linear MDP and a random tabular generator.

Benchmark construction
----------------------
States live in [0, 1]^2 and there are two actions.  The six features

    phi(s, a) = (s1 (1 - a), s1 a, 1 - s1, s2 (1 - a), s2 a, 1 - s2) / 2

are nonnegative and sum to one, so they serve both as regression features and
as mixture weights.  Mixture component ``k`` draws each next-state coordinate
``j`` independently from Beta(10 alpha[k, j], 10 beta[k, j]).  The mean reward
is ``theta @ phi``.

Thirty Uniform(0, 1) variates are drawn from a Philox generator keyed by the
seed, in this order: theta[0..5], then alpha[0,0], beta[0,0], alpha[0,1],
beta[0,1], alpha[1,0], ... (component-major, coordinate-minor, alpha before
beta).  Rewards are then in [0, 1].
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .mdp_core import LinearMdp, TabularMdp

FEATURE_DIM = 6
STATE_DIM = 2
NUM_ACTIONS = 2


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator used throughout the package (Philox-4x64)."""
    return np.random.Generator(np.random.Philox(seed))


def benchmark_features(states, actions) -> np.ndarray:
    s = np.asarray(states, dtype=float)
    a = np.asarray(actions)
    single = s.ndim == 1
    s = np.atleast_2d(s)
    a = np.broadcast_to(np.atleast_1d(a), (len(s),))
    if np.any((s < 0) | (s > 1)) or not np.all(np.isfinite(s)):
        raise ValueError("benchmark states must lie in [0, 1]^2")
    if np.any((a != 0) & (a != 1)):
        raise ValueError("benchmark actions must be 0 or 1")
    a = a.astype(float)
    s1, s2 = s[:, 0], s[:, 1]
    phi = 0.5 * np.stack(
        [s1 * (1 - a), s1 * a, 1 - s1, s2 * (1 - a), s2 * a, 1 - s2], axis=1
    )
    return phi[0] if single else phi


@dataclass(frozen=True)
class BenchmarkSpec:
    seed: int = 0
    gamma: float = 0.9
    reward_noise_sd: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.reward_noise_sd < 0:
            raise ValueError("reward_noise_sd must be nonnegative")


@dataclass(frozen=True, eq=False)
class BenchmarkMdp(LinearMdp):
    alphas: np.ndarray = None
    betas: np.ndarray = None
    spec: BenchmarkSpec = None

    def mean_next_state(self, states, actions) -> np.ndarray:
        """Analytic E[s' | s, a] of the Beta mixture."""
        means = self.alphas / (self.alphas + self.betas)
        return self.features(states, actions) @ means

    def params(self) -> dict:
        return {
            "seed": self.spec.seed,
            "gamma": self.gamma,
            "theta": self.theta.tolist(),
            "alpha": self.alphas.tolist(),
            "beta": self.betas.tolist(),
            "draw_order": "theta[0..5], then (alpha[k,j], beta[k,j]) for k=0..5, j=0..1",
        }

    def dump_params(self) -> str:
        return json.dumps(self.params(), indent=2)


def _uniform_states(rng, m):
    return rng.random((m, STATE_DIM))


def build_benchmark(spec: BenchmarkSpec = BenchmarkSpec()) -> BenchmarkMdp:
    u = make_rng(spec.seed).random(30)
    theta = u[:FEATURE_DIM].copy()
    ab = u[FEATURE_DIM:].reshape(FEATURE_DIM, STATE_DIM, 2)
    alphas, betas = ab[..., 0].copy(), ab[..., 1].copy()
    for arr in (theta, alphas, betas):
        arr.setflags(write=False)
    shape_a, shape_b = 10 * alphas, 10 * betas

    def component_sampler(k, rng):
        return rng.beta(shape_a[k], shape_b[k])

    noise = None
    if spec.reward_noise_sd > 0:
        sd = spec.reward_noise_sd

        def noise(r, rng):
            return sd * rng.standard_normal(np.shape(r))

    return BenchmarkMdp(
        feature_map=benchmark_features,
        theta=theta,
        component_sampler=component_sampler,
        initial_sampler=_uniform_states,
        num_actions=NUM_ACTIONS,
        gamma=spec.gamma,
        reward_bound=1.0,
        reward_noise=noise,
        check_features=False,
        alphas=alphas,
        betas=betas,
        spec=spec,
    )


def benchmark_behavior(rng: np.random.Generator, n: int):
    """Uniform states on the square and fair-coin actions."""
    states = rng.random((n, STATE_DIM))
    actions = (rng.random(n) < 0.5).astype(int)
    return states, actions


def random_tabular(seed, num_states: int, num_actions: int, reward_bound: float = 1.0,
                   dirichlet_concentration: float = 1.0, gamma: float = 0.9) -> TabularMdp:
    if num_states < 1 or num_actions < 1:
        raise ValueError("need at least one state and one action")
    if reward_bound <= 0 or dirichlet_concentration <= 0:
        raise ValueError("reward_bound and concentration must be positive")
    rng = make_rng(seed)
    rewards = rng.uniform(-reward_bound, reward_bound, size=(num_states, num_actions))
    P = rng.dirichlet(np.full(num_states, dirichlet_concentration),
                      size=(num_states, num_actions))
    P /= P.sum(axis=2, keepdims=True)
    return TabularMdp(rewards, P, np.full(num_states, 1.0 / num_states), gamma,
                      reward_bound=reward_bound)


def uniform_pair_behavior(num_states: int, num_actions: int):
    """Behavior sampler drawing (s, a) uniformly over all pairs."""

    def behavior(rng, n):
        cells = rng.integers(num_states * num_actions, size=n)
        return cells // num_actions, cells % num_actions

    return behavior


def one_hot_features(num_states: int, num_actions: int):
    d = num_states * num_actions

    def feature_map(states, actions):
        cells = np.asarray(states) * num_actions + np.asarray(actions)
        return np.eye(d)[cells]

    return feature_map
