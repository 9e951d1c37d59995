"""Linear fitted Q-iteration with a singular-design fallback and ball projection."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .data_gen import DataError, Dataset, feature_matrix, next_state_features


@dataclass(frozen=True, eq=False)
class LinearQFunction:
    weights: np.ndarray
    feature_map: object
    num_actions: int
    ball_radius: float = math.inf

    def __call__(self, states, actions):
        return self.feature_map(states, actions) @ self.weights

    def values(self, states) -> np.ndarray:
        """Q-values of every action, shape (m, |A|)."""
        m = len(states)
        return np.stack([self.feature_map(states, np.full(m, a)) @ self.weights
                         for a in range(self.num_actions)], axis=1)

    def to_json(self, iterations: int | None = None, **extra) -> str:
        doc = {"d": len(self.weights), "B": _json_float(self.ball_radius), "K": iterations,
               "weights": self.weights.tolist()}
        doc.update(extra)
        return json.dumps(doc)


@dataclass(frozen=True, eq=False)
class TabularQFunction:
    table: np.ndarray

    def __call__(self, states, actions):
        return self.table[states, actions]

    def values(self, states) -> np.ndarray:
        return self.table[np.asarray(states)]

    @property
    def num_actions(self) -> int:
        return self.table.shape[1]


def _json_float(x):
    return x if math.isfinite(x) else None


@dataclass(frozen=True)
class FqiConfig:
    iterations: int = 50
    ball_radius: float = 1e6
    singular_tolerance: float | None = None   # None -> 1e-8 * n
    initial_weights: np.ndarray | None = None
    # "fallback": zero weights on a singular design; "lstsq": minimum-norm OLS
    solver: str = "fallback"

    def __post_init__(self):
        if self.solver not in ("fallback", "lstsq"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.ball_radius <= 0:
            raise ValueError("ball_radius must be positive")
        if self.singular_tolerance is not None and self.singular_tolerance < 0:
            raise ValueError("singular_tolerance must be nonnegative")


def project_to_ball(w: np.ndarray, radius: float) -> np.ndarray:
    norm = np.linalg.norm(w)
    if norm <= radius:
        return w
    return w * (radius / norm)


@dataclass
class FqiTrace:
    """Weights after every iteration, for diagnostics."""
    weights: list = field(default_factory=list)
    singular: bool = False


def fqi_fit(dataset: Dataset, feature_map, config: FqiConfig, gamma: float,
            num_actions: int, trace: FqiTrace | None = None) -> LinearQFunction:
    """Run K rounds of least-squares FQI and return the final linear Q-function.

    Each round regresses ``r + gamma * max_a' f(s', a')`` on the features by
    ordinary least squares.  When the smallest eigenvalue of the design matrix
    is at or below ``singular_tolerance`` the "fallback" solver returns zero
    weights, while the "lstsq" solver returns the minimum-norm least-squares
    weights (fitted values are still unique).  Each solution is projected onto
    the Euclidean ball of radius B.
    """
    phi = feature_matrix(dataset, feature_map)
    phi_next = next_state_features(dataset, feature_map, num_actions)
    n, d = phi.shape
    sigma = phi.T @ phi
    tol = 1e-8 * n if config.singular_tolerance is None else config.singular_tolerance
    lam_min = float(np.linalg.eigvalsh(0.5 * (sigma + sigma.T))[0])
    singular = not lam_min > tol
    factor = None if singular else cho_factor(sigma)
    pinv = np.linalg.pinv(sigma, rcond=1e-10, hermitian=True) if singular else None
    if trace is not None:
        trace.singular = singular

    w = np.zeros(d) if config.initial_weights is None else np.asarray(config.initial_weights, float)
    if w.shape != (d,):
        raise ValueError(f"initial_weights must have length {d}")
    rewards = dataset.rewards
    for _ in range(config.iterations):
        targets = rewards + gamma * (phi_next @ w).max(axis=1)
        if not np.all(np.isfinite(targets)):
            bad = int(np.argwhere(~np.isfinite(targets))[0, 0])
            raise DataError(f"non-finite regression target at sample {bad}")
        if factor is not None:
            w_raw = cho_solve(factor, phi.T @ targets)
        elif config.solver == "lstsq":
            w_raw = pinv @ (phi.T @ targets)
        else:
            w_raw = np.zeros(d)
        w = project_to_ball(w_raw, config.ball_radius)
        if trace is not None:
            trace.weights.append(w.copy())
    return LinearQFunction(w, feature_map, num_actions, config.ball_radius)


def min_iterations(n: int, lambda0: float, d: int, gamma: float) -> int:
    """Smallest iteration count K meeting the uniform-convergence threshold."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if not 0 < lambda0 <= 1 or not 0 < gamma < 1:
        raise ValueError("need lambda0 in (0, 1] and gamma in (0, 1)")
    k = math.log(lambda0 ** 2 * n / (72 * d) ** 2) / (2 * math.log(1 / gamma))
    # a closed form that lands on an integer can come out a few ulps high
    return math.ceil(max(1.0, k) - 1e-9)


def greedy_action(q, states) -> np.ndarray:
    """Lowest-index maximiser of q(s, .) for each state in the batch."""
    return np.argmax(q.values(states), axis=1)


@dataclass(frozen=True, eq=False)
class GreedyPolicy:
    q: object
    tie_break: str = "lowest-index"

    def __call__(self, states) -> np.ndarray:
        return greedy_action(self.q, states)

    def table(self, num_states: int) -> np.ndarray:
        """Action at each integer state 0..num_states-1."""
        return greedy_action(self.q, np.arange(num_states))
