"""Minimax Bellman-residual estimation (MSBO) over linear classes.

For linear witnesses the inner maximisation is a concave quadratic with a
closed-form solution, so the estimator reduces to minimising the
piecewise-quadratic

    g(v) = b(v)^T Sigma^+ b(v) / (4 zeta),   b(v) = sum_i phi_i delta_i(v),

where ``delta_i(v)`` is the Bellman residual of ``q = v^T phi`` at sample i.
``g`` is minimised by projected subgradient descent from several seeded
starting points.  Each descent run is followed by an active-branch Newton
refinement: with the maximising next-state actions frozen, ``b`` is affine in
``v`` and its root solves a d x d linear system.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data_gen import Dataset, feature_matrix, next_state_features
from .fqi import LinearQFunction, project_to_ball


@dataclass(frozen=True)
class MsboConfig:
    zeta: float = 0.5
    weight_bound: float = 10.0
    witness_bound: float = 10.0
    outer_steps: int = 500
    step_size: float | None = None     # None -> 1 / (n max(1, weight_bound))
    restarts: int = 5
    tolerance: float = 1e-10
    seed: int = 0
    discounted: bool = True            # False uses the residual r - q + max q'
    newton_refine: bool = True
    initial_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.zeta <= 0:
            raise ValueError("zeta must be positive")
        if self.weight_bound <= 0 or self.witness_bound <= 0:
            raise ValueError("class bounds must be positive")
        if self.restarts < 1 or self.outer_steps < 0:
            raise ValueError("need restarts >= 1 and outer_steps >= 0")


@dataclass(frozen=True)
class MsboSolution:
    q_weights: np.ndarray
    final_objective: float
    witness_weights: np.ndarray
    iterations_used: int
    converged: bool
    restart_objectives: tuple

    def q_function(self, feature_map, num_actions, weight_bound=math.inf) -> LinearQFunction:
        return LinearQFunction(self.q_weights, feature_map, num_actions, weight_bound)

    def to_json(self, config: MsboConfig) -> str:
        return json.dumps({
            "d": len(self.q_weights), "B": config.weight_bound, "K": self.iterations_used,
            "weights": self.q_weights.tolist(), "zeta": config.zeta,
            "final_objective": self.final_objective, "restarts": config.restarts,
        })


class _Problem:
    """Precomputed design quantities shared by every objective evaluation."""

    def __init__(self, dataset: Dataset, feature_map, num_actions: int, gamma: float):
        self.phi = feature_matrix(dataset, feature_map)
        self.phi_next = next_state_features(dataset, feature_map, num_actions)
        self.rewards = dataset.rewards
        self.gamma = gamma
        self.n, self.d = self.phi.shape
        self.sigma = self.phi.T @ self.phi
        self.sigma_pinv = np.linalg.pinv(self.sigma, hermitian=True)
        self.rows = np.arange(self.n)

    def next_branch(self, v):
        return np.argmax(self.phi_next @ v, axis=1)

    def residuals(self, v, branch=None):
        if branch is None:
            branch = self.next_branch(v)
        nxt = self.phi_next[self.rows, branch] @ v
        return self.rewards - self.phi @ v + self.gamma * nxt, branch


def _witness(problem: _Problem, delta, zeta, witness_bound):
    b = problem.phi.T @ delta
    u = problem.sigma_pinv @ b / (2 * zeta)
    norm = np.linalg.norm(u)
    if norm > witness_bound:
        u = u * (witness_bound / norm)
    value = float(b @ u - zeta * u @ problem.sigma @ u)
    return u, value


def inner_max(dataset: Dataset, feature_map, q_weights, zeta: float, witness_bound: float,
              gamma: float, num_actions: int, discounted: bool = True):
    """Maximising witness weights and the objective value at q = q_weights^T phi."""
    problem = _Problem(dataset, feature_map, num_actions, gamma if discounted else 1.0)
    delta, _ = problem.residuals(np.asarray(q_weights, float))
    return _witness(problem, delta, zeta, witness_bound)


def _subgradient(problem: _Problem, u, branch):
    # d delta_i / dv = -phi_i + gamma phi(s'_i, a*_i); Danskin's theorem at witness u
    jac = -problem.phi + problem.gamma * problem.phi_next[problem.rows, branch]
    return jac.T @ (problem.phi @ u)


def _newton_refine(problem, v, zeta, cfg, max_rounds=50):
    """Solve b(v) = 0 with the next-state argmax frozen, until the branch is stable."""
    best_v = v
    best_val = _witness(problem, problem.residuals(v)[0], zeta, cfg.witness_bound)[1]
    c = problem.phi.T @ problem.rewards
    seen = set()
    for _ in range(max_rounds):
        branch = problem.next_branch(v)
        key = branch.tobytes()
        if key in seen:
            break
        seen.add(key)
        a = problem.phi.T @ (problem.phi - problem.gamma * problem.phi_next[problem.rows, branch])
        v_new, *_ = np.linalg.lstsq(a, c, rcond=None)
        v_new = project_to_ball(v_new, cfg.weight_bound)
        val = _witness(problem, problem.residuals(v_new)[0], zeta, cfg.witness_bound)[1]
        if val < best_val:
            best_v, best_val = v_new, val
        v = v_new
    return best_v, best_val


def msbo_fit(dataset: Dataset, feature_map, config: MsboConfig, gamma: float,
             num_actions: int) -> MsboSolution:
    """Minimise the MSBO objective; returns the best iterate over all restarts."""
    cfg = config
    problem = _Problem(dataset, feature_map, num_actions, gamma if cfg.discounted else 1.0)
    n, d = problem.n, problem.d
    eta0 = cfg.step_size if cfg.step_size is not None else 1.0 / (n * max(1.0, cfg.weight_bound))
    rng = np.random.Generator(np.random.Philox(cfg.seed))

    starts = []
    if cfg.initial_weights is not None:
        starts.append(project_to_ball(np.asarray(cfg.initial_weights, float), cfg.weight_bound))
    while len(starts) < cfg.restarts:
        # uniform draw from the ball
        z = rng.standard_normal(d)
        z *= cfg.weight_bound * rng.random() ** (1.0 / d) / np.linalg.norm(z)
        starts.append(z)

    results = []
    total_steps = 0
    converged_any = False
    for v in starts:
        best_v, best_val = v, math.inf
        converged = False
        for t in range(cfg.outer_steps + 1):
            delta, branch = problem.residuals(v)
            u, val = _witness(problem, delta, cfg.zeta, cfg.witness_bound)
            total_steps += 1
            if val < best_val:
                best_v, best_val = v, val
            if val <= cfg.tolerance or t == cfg.outer_steps:
                converged = val <= cfg.tolerance
                break
            step = eta0 / math.sqrt(t + 1) * _subgradient(problem, u, branch)
            v_next = project_to_ball(v - step, cfg.weight_bound)
            if np.linalg.norm(v_next - v) < cfg.tolerance:
                converged = True
                v = v_next
                break
            v = v_next
        if cfg.newton_refine and best_val > cfg.tolerance:
            v_ref, val_ref = _newton_refine(problem, best_v, cfg.zeta, cfg)
            if val_ref < best_val:
                best_v, best_val = v_ref, val_ref
            converged = converged or best_val <= cfg.tolerance
        converged_any = converged_any or converged
        results.append((best_val, best_v))
        if best_val <= cfg.tolerance:
            break

    objectives = tuple(r[0] for r in results)
    idx = int(np.argmin(objectives))  # ties -> lowest restart index
    best_val, best_v = results[idx]
    if not converged_any:
        warnings.warn("MSBO did not reach its tolerance; returning the best iterate",
                      RuntimeWarning, stacklevel=2)
    delta, _ = problem.residuals(best_v)
    u, _ = _witness(problem, delta, cfg.zeta, cfg.witness_bound)
    return MsboSolution(best_v, float(best_val), u, total_steps, converged_any, objectives)
