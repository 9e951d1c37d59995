"""Action-gap (margin) computations and empirical margin-profile fits."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

TIE_TOL = 1e-9


class DegenerateMarginError(ValueError):
    """No positive margin exists, so the requested constant is undefined."""


def margins(qvalues, tol: float = TIE_TOL) -> np.ndarray:
    """Per-row gap between the best value and the best value outside the argmax set.

    ``qvalues`` has shape (m, |A|).  Rows whose actions all tie within ``tol``
    get margin 0.
    """
    q = np.atleast_2d(np.asarray(qvalues, dtype=float))
    top = q.max(axis=1, keepdims=True)
    in_argmax = q >= top - tol
    rest = np.where(in_argmax, -np.inf, q).max(axis=1)
    gap = top[:, 0] - rest
    return np.where(np.isfinite(gap), gap, 0.0)


def margin_at(qstar, s, tol: float = TIE_TOL) -> float:
    """Margin of the Q-function oracle ``qstar`` at a single state."""
    return float(margins(qstar.values(np.asarray([s])), tol)[0])


def occupancy_sample(mdp, policy, rng: np.random.Generator, m: int = 1) -> np.ndarray:
    """Exact draws from the discounted occupancy of ``policy``.

    Each draw rolls the policy for T ~ Geometric(1 - gamma) steps (support
    0, 1, 2, ...) from the initial distribution and returns the state reached.
    """
    steps = rng.geometric(1 - mdp.gamma, size=m) - 1 if mdp.gamma > 0 else np.zeros(m, int)
    s = mdp.initial_states(rng, m)
    out = np.array(s, copy=True)
    active = np.flatnonzero(steps > 0)
    t = 0
    while active.size:
        cur = s[active]
        a = np.asarray(policy(cur), dtype=int)
        s_next = mdp.transition(cur, a, rng)
        s[active] = s_next
        t += 1
        done = steps[active] == t
        out[active[done]] = s_next[done]
        active = active[~done]
    return out


@dataclass(frozen=True)
class MarginProfile:
    delta_grid: np.ndarray
    cdf_values: np.ndarray                 # max over probed policies
    per_policy_cdf: np.ndarray             # shape (num_policies, len(grid))
    fitted_alpha: float
    fitted_delta0: float
    fit_quality: float
    degenerate: bool = False

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta", "cdf_max_over_policies"])
        for d, c in zip(self.delta_grid, self.cdf_values):
            w.writerow([repr(float(d)), repr(float(c))])
        return buf.getvalue()

    def to_json(self) -> str:
        def enc(x):
            return x if math.isfinite(x) else ("inf" if x > 0 else None)
        return json.dumps({"alpha": enc(self.fitted_alpha), "delta0": enc(self.fitted_delta0),
                           "r2": enc(self.fit_quality), "degenerate": self.degenerate})


def fit_margin_exponent(delta_grid, cdf, cdf_cap: float = 0.5):
    """OLS of log CDF on log delta over grid points with CDF in (0, cdf_cap].

    Returns (alpha, delta0, r2).  An identically zero CDF returns alpha = inf,
    the convention for margins bounded away from zero.
    """
    delta_grid = np.asarray(delta_grid, float)
    cdf = np.asarray(cdf, float)
    if np.all(cdf == 0):
        positive = delta_grid[cdf == 0]
        return math.inf, float(positive.max()), math.nan
    mask = (cdf > 0) & (cdf <= cdf_cap)
    if mask.sum() < 2:
        return math.nan, math.nan, math.nan
    x, y = np.log(delta_grid[mask]), np.log(cdf[mask])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    delta0 = math.exp(-intercept / slope) if slope != 0 else math.inf
    return float(slope), delta0, r2


def empirical_cdf(values, delta_grid) -> np.ndarray:
    """Fraction of ``values`` in (0, delta] for each delta."""
    v = np.sort(np.asarray(values, float))
    m = len(v)
    n_zero = np.searchsorted(v, 0.0, side="right")
    return (np.searchsorted(v, delta_grid, side="right") - n_zero) / m


def is_atomic(values, tol: float = TIE_TOL, max_fraction: float = 0.05) -> bool:
    """True when ``values`` take few distinct levels, as on a finite state space."""
    v = np.sort(np.asarray(values, float))
    levels = 1 + int(np.sum(np.diff(v) > tol))
    return levels <= max(1, max_fraction * len(v))


def estimate_profile(mdp, qstar, policies, samples_per_policy: int, delta_grid,
                     rng: np.random.Generator, tol: float = TIE_TOL,
                     cdf_cap: float = 0.5) -> MarginProfile:
    """Empirical sup-over-policies margin CDF and its power-law fit."""
    if not policies:
        raise ValueError("need at least one probe policy")
    delta_grid = np.asarray(delta_grid, float)
    if np.any(np.diff(delta_grid) <= 0) or np.any(delta_grid <= 0):
        raise ValueError("delta_grid must be positive and increasing")
    per_policy = []
    positive = []
    for pi in policies:
        states = occupancy_sample(mdp, pi, rng, samples_per_policy)
        gaps = margins(qstar.values(states), tol)
        positive.append(gaps[gaps > 0])
        per_policy.append(empirical_cdf(gaps, delta_grid))
    per_policy = np.asarray(per_policy)
    cdf = per_policy.max(axis=0)
    positive = np.concatenate(positive)
    if positive.size == 0:
        return MarginProfile(delta_grid, cdf, per_policy, math.nan, math.nan, math.nan,
                             degenerate=True)
    if is_atomic(positive, tol):
        # finitely many margin values: the CDF vanishes below the smallest one
        return MarginProfile(delta_grid, cdf, per_policy, math.inf, float(positive.min()),
                             math.nan)
    alpha, delta0, r2 = fit_margin_exponent(delta_grid, cdf, cdf_cap)
    return MarginProfile(delta_grid, cdf, per_policy, alpha, delta0, r2)


def tabular_delta0(qstar, gap_tolerance: float = TIE_TOL) -> float:
    """Smallest positive per-state margin of a Q table (alpha = inf constant)."""
    table = qstar.table if hasattr(qstar, "table") else np.asarray(qstar, float)
    gaps = margins(table, gap_tolerance)
    positive = gaps[gaps > 0]
    if positive.size == 0:
        raise DegenerateMarginError("every state has all actions tied")
    return float(positive.min())


def linear_delta0(betas, mu_max: float) -> float:
    """Margin constant for Q*(s, a) = beta_a^T psi(s) with density bound ``mu_max``.

    delta0 = 1 / (6 mu_max sum_a max_{a': beta_a != beta_a'} 1/||beta_a - beta_a'||)
    """
    if mu_max <= 0:
        raise ValueError("mu_max must be positive")
    b = np.asarray(betas, float)
    total = 0.0
    for a in range(len(b)):
        dists = np.linalg.norm(b[a] - b, axis=1)
        dists = dists[dists > 0]
        if dists.size == 0:
            # action with no distinct partner contributes an empty max
            continue
        total += float(np.max(1.0 / dists))
    if total == 0.0:
        raise DegenerateMarginError("all coefficient vectors are equal")
    return 1.0 / (6 * mu_max * total)
