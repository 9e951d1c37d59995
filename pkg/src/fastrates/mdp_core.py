"""Finite-action discounted MDPs: tabular tables, linear models, exact solvers.

Two concrete model families live here.  ``TabularMdp`` carries full reward and
transition tables and supports exact dynamic programming.  ``LinearMdp`` is a
sampler whose mean reward and transition law are linear in a known feature
map; it only supports simulation.

Both expose the same vectorised simulation surface (``initial_states``,
``reward``, ``transition``) so that dataset generation, Monte-Carlo evaluation
and occupancy sampling are written once.  States are integer indices for the
tabular model and rows of a float array for the linear model.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

DIRECT_SOLVE_MAX_STATES = 2000


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver fails to reach its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


class MdpModel(Protocol):
    num_actions: int
    gamma: float

    def initial_states(self, rng: np.random.Generator, m: int) -> np.ndarray: ...

    def reward(self, states: np.ndarray, actions: np.ndarray,
               rng: np.random.Generator | None = None) -> np.ndarray: ...

    def transition(self, states: np.ndarray, actions: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray: ...


# A policy maps a batch of states to a batch of integer actions.
Policy = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class TabularMdp:
    reward_table: np.ndarray
    transition_table: np.ndarray
    initial_dist: np.ndarray
    gamma: float
    reward_bound: float | None = None
    reward_noise: Callable[[np.ndarray, np.random.Generator], np.ndarray] | None = None

    def __post_init__(self):
        r = np.array(self.reward_table, dtype=float)
        p = np.array(self.transition_table, dtype=float)
        mu = np.array(self.initial_dist, dtype=float)
        if r.ndim != 2:
            raise ValueError("reward_table must be |S| x |A|")
        S, A = r.shape
        if S < 1 or A < 1:
            raise ValueError("need at least one state and one action")
        if p.shape != (S, A, S):
            raise ValueError(f"transition_table shape {p.shape} != {(S, A, S)}")
        if mu.shape != (S,):
            raise ValueError("initial_dist must have length |S|")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if np.any(p < 0) or np.max(np.abs(p.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("transition rows must be nonnegative and sum to 1")
        if np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-12:
            raise ValueError("initial_dist must be a probability vector")
        bound = float(np.max(np.abs(r))) if self.reward_bound is None else float(self.reward_bound)
        if np.max(np.abs(r)) > bound:
            raise ValueError("reward_table exceeds the declared reward bound")
        for name, arr in (("reward_table", r), ("transition_table", p), ("initial_dist", mu)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "reward_bound", bound)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def num_states(self) -> int:
        return self.reward_table.shape[0]

    @property
    def num_actions(self) -> int:
        return self.reward_table.shape[1]

    # -- simulation surface ------------------------------------------------
    def initial_states(self, rng, m):
        return rng.choice(self.num_states, size=m, p=self.initial_dist)

    def reward(self, states, actions, rng=None):
        r = self.reward_table[states, actions]
        if self.reward_noise is not None and rng is not None:
            noise = self.reward_noise(r, rng)
            r = np.clip(r + noise, -self.reward_bound, self.reward_bound)
        return r

    def transition(self, states, actions, rng):
        # inverse-CDF sampling, one uniform per row
        cdf = np.cumsum(self.transition_table[states, actions], axis=-1)
        u = rng.random(np.shape(states))
        idx = (u[..., None] >= cdf).sum(axis=-1)
        return np.minimum(idx, self.num_states - 1)

    # -- serialisation -----------------------------------------------------
    def to_json(self) -> str:
        doc = {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "rewards": self.reward_table.ravel().tolist(),
            "transitions": self.transition_table.ravel().tolist(),
            "initial_dist": self.initial_dist.tolist(),
            "gamma": self.gamma,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "TabularMdp":
        doc = json.loads(text)
        S, A = int(doc["num_states"]), int(doc["num_actions"])
        return cls(
            reward_table=np.asarray(doc["rewards"], dtype=float).reshape(S, A),
            transition_table=np.asarray(doc["transitions"], dtype=float).reshape(S, A, S),
            initial_dist=np.asarray(doc["initial_dist"], dtype=float),
            gamma=float(doc["gamma"]),
        )


@dataclass(frozen=True, eq=False)
class LinearMdp:
    """Linear MDP defined by features, reward weights and component samplers.

    ``component_sampler(k, rng)`` draws one next state from the measure
    attached to feature coordinate ``k`` for every entry of the index array
    ``k``.  Features must be nonnegative and sum to one so that they can be
    used directly as mixture weights over the components.
    """

    feature_map: Callable[[np.ndarray, np.ndarray], np.ndarray]
    theta: np.ndarray
    component_sampler: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    initial_sampler: Callable[[np.random.Generator, int], np.ndarray]
    num_actions: int
    gamma: float
    reward_bound: float = 1.0
    reward_noise: Callable[[np.ndarray, np.random.Generator], np.ndarray] | None = None
    check_features: bool = field(default=__debug__)

    @property
    def dim(self) -> int:
        return len(self.theta)

    def features(self, states, actions):
        phi = self.feature_map(states, actions)
        if self.check_features:
            norms = np.linalg.norm(phi, axis=-1)
            if np.any(norms > 1.0 + 1e-12):
                raise ValueError("feature norm exceeds 1")
        return phi

    def initial_states(self, rng, m):
        return self.initial_sampler(rng, m)

    def reward(self, states, actions, rng=None):
        r = self.features(states, actions) @ self.theta
        if self.reward_noise is not None and rng is not None:
            r = np.clip(r + self.reward_noise(r, rng), -self.reward_bound, self.reward_bound)
        return r

    def transition(self, states, actions, rng):
        # A candidate is drawn from every component for every row, so the
        # amount of randomness consumed does not depend on the actions taken.
        # Two policies run on the same stream then share all random numbers.
        phi = self.features(states, actions)
        m, d = phi.shape
        u = rng.random(m)
        candidates = self.component_sampler(np.tile(np.arange(d), m), rng).reshape(m, d, -1)
        cdf = np.cumsum(phi, axis=-1)
        k = np.minimum((u[:, None] * cdf[:, -1:] >= cdf).sum(axis=1), d - 1)
        return candidates[np.arange(m), k]


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.actions)

    @property
    def steps(self):
        return list(zip(self.states, self.actions, self.rewards))


def _check_q(mdp: TabularMdp, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != mdp.reward_table.shape:
        raise ValueError(f"Q table shape {f.shape} != {mdp.reward_table.shape}")
    return f


def bellman_backup(mdp: TabularMdp, f) -> np.ndarray:
    """Apply the Bellman optimality operator exactly using the MDP tables."""
    f = _check_q(mdp, f)
    return mdp.reward_table + mdp.gamma * mdp.transition_table @ f.max(axis=1)


def default_max_iters(mdp: TabularMdp, tol: float) -> int:
    M = max(mdp.reward_bound, 1e-300)
    if mdp.gamma == 0.0:
        return 10
    return math.ceil(math.log(tol * (1 - mdp.gamma) / (2 * M)) / math.log(mdp.gamma)) + 10


def value_iteration(mdp: TabularMdp, tol: float = 1e-10, max_iters: int | None = None,
                    q0=None) -> np.ndarray:
    """Iterate the Bellman backup from ``q0`` until the residual is below ``tol``.

    The returned table satisfies ``|Q - TQ|_inf <= tol`` and so lies within
    ``tol / (1 - gamma)`` of the optimal Q-function.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iters is None:
        max_iters = default_max_iters(mdp, tol)
    q = np.zeros_like(mdp.reward_table) if q0 is None else _check_q(mdp, q0).copy()
    residual = math.inf
    for _ in range(max_iters + 1):
        tq = bellman_backup(mdp, q)
        residual = float(np.max(np.abs(tq - q)))
        if residual <= tol:
            return q
        q = tq
    raise ConvergenceError("value iteration did not converge", residual)


def _policy_matrices(mdp: TabularMdp, policy):
    pi = np.asarray(policy, dtype=int)
    if pi.shape != (mdp.num_states,):
        raise ValueError("policy must assign an action to every state")
    if np.any((pi < 0) | (pi >= mdp.num_actions)):
        raise ValueError("policy action out of range")
    rows = np.arange(mdp.num_states)
    return mdp.transition_table[rows, pi], mdp.reward_table[rows, pi]


def discounted_visitation(mdp: TabularMdp, policy) -> np.ndarray:
    """Return mu^T (I - gamma P_pi)^{-1}, the unnormalised discounted visitation."""
    P, _ = _policy_matrices(mdp, policy)
    S = mdp.num_states
    if S <= DIRECT_SOLVE_MAX_STATES:
        a = np.eye(S) - mdp.gamma * P.T
        try:
            return np.linalg.solve(a, mdp.initial_dist)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - impossible for gamma < 1
            raise RuntimeError("singular occupancy system") from exc
    # truncated series; remainder mass is gamma**T / (1 - gamma)
    T = default_max_iters(mdp, 1e-14)
    x = mdp.initial_dist.copy()
    total = x.copy()
    for _ in range(T):
        x = mdp.gamma * (x @ P)
        total += x
    return total


def exact_occupancy(mdp: TabularMdp, policy) -> np.ndarray:
    """Normalised discounted state occupancy of a deterministic policy."""
    d = (1 - mdp.gamma) * discounted_visitation(mdp, policy)
    return np.clip(d, 0.0, None)


def exact_policy_value(mdp: TabularMdp, policy) -> float:
    _, r = _policy_matrices(mdp, policy)
    return float(discounted_visitation(mdp, policy) @ r)


def policy_q_values(mdp: TabularMdp, policy) -> np.ndarray:
    """Q^pi for a deterministic policy, by solving the policy Bellman equation."""
    P, r = _policy_matrices(mdp, policy)
    v = np.linalg.solve(np.eye(mdp.num_states) - mdp.gamma * P, r)
    return mdp.reward_table + mdp.gamma * mdp.transition_table @ v


def sample_trajectory(mdp: MdpModel, policy: Policy, horizon: int,
                      rng: np.random.Generator) -> Trajectory:
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    s = mdp.initial_states(rng, 1)
    states, actions, rewards = [], [], []
    for _ in range(horizon):
        a = np.asarray(policy(s), dtype=int)
        states.append(s[0])
        actions.append(int(a[0]))
        rewards.append(float(mdp.reward(s, a, rng)[0]))
        s = mdp.transition(s, a, rng)
    state_shape = np.shape(s)[1:]
    return Trajectory(
        states=np.asarray(states).reshape((horizon,) + state_shape),
        actions=np.asarray(actions, dtype=int),
        rewards=np.asarray(rewards, dtype=float),
    )


def discounted_returns(mdp: MdpModel, policy: Policy, states: np.ndarray, horizon: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Truncated discounted return of a rollout from each of ``states``."""
    s = states
    total = np.zeros(len(states))
    discount = 1.0
    for _ in range(horizon):
        a = np.asarray(policy(s), dtype=int)
        total += discount * mdp.reward(s, a, rng)
        s = mdp.transition(s, a, rng)
        discount *= mdp.gamma
    return total
