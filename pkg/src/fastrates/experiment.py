"""Seeded replication sweeps, regret-curve statistics and log-log slope fits.

Replication seeds
-----------------
Every (n, replication) cell gets the 64-bit seed

    splitmix64(splitmix64(splitmix64(master_seed) ^ n) ^ replication)

where splitmix64 is the standard finaliser of the SplitMix64 generator.  The
reference policy uses ``splitmix64(master_seed ^ REFERENCE_SALT)``.  Each
replication evaluates its policy and the reference on the same fresh initial
states, seeded by ``splitmix64(cell_seed ^ EVAL_SALT)``.  With
``shared_eval = true`` every replication instead uses the single sample
``splitmix64(master_seed ^ EVAL_SALT)``, so the reference rollouts are done
once; that is cheaper, but the evaluation error of that one sample is then
common to the whole sweep and does not average out over replications.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data_gen import draw_dataset
from .fqi import FqiConfig, GreedyPolicy, LinearQFunction, TabularQFunction, fqi_fit
from .mdp_core import TabularMdp, value_iteration
from .msbo import MsboConfig, msbo_fit
from .policy_eval import EvalConfig, ReferenceValueCache, estimate_regret, reference_optimal
from .synthetic_benchmark import (BenchmarkSpec, benchmark_behavior, benchmark_features,
                                  build_benchmark, make_rng, one_hot_features, random_tabular,
                                  uniform_pair_behavior)

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
REFERENCE_SALT = 0x5245464552454E43   # "REFERENC"
EVAL_SALT = 0x4556414C55415445        # "EVALUATE"
# The instance drawn from benchmark seed 0 has one action optimal on the whole
# square, so every greedy policy has zero regret.  Sweeps default to the first
# seed whose reference policy gives the minority action at least a quarter of
# the square (see ``minority_action_share``).
SWEEP_BENCHMARK_SEED = 9
CSV_COLUMNS = ["n", "replication", "seed", "estimator", "K_or_steps", "regret",
               "v_star_hat", "v_pi_hat", "std_error", "wall_time_ms"]


class ConfigError(ValueError):
    pass


class SweepFailure(RuntimeError):
    pass


class FitError(ValueError):
    pass


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def replication_seed(master_seed: int, n: int, replication: int) -> int:
    return splitmix64(splitmix64(splitmix64(master_seed & MASK64) ^ n) ^ replication)


@dataclass(frozen=True)
class SweepConfig:
    problem: str = "benchmark"              # benchmark | tabular
    estimator: str = "fqi"                  # fqi | msbo
    n_grid: tuple = (64, 90, 128, 256, 512)
    replications: int = 70
    master_seed: int = 0
    parallelism: int = 1
    gamma: float = 0.9
    benchmark_seed: int = SWEEP_BENCHMARK_SEED
    # tabular instance
    num_states: int = 5
    num_actions: int = 2
    tabular_seed: int = 0
    reward_bound: float = 1.0
    dirichlet_concentration: float = 1.0
    # estimators
    fqi_iterations: int = 50
    fqi_solver: str = "lstsq"               # lstsq | fallback
    ball_radius: float = 1e6
    msbo_zeta: float = 0.5
    msbo_weight_bound: float = 1e6
    msbo_witness_bound: float = 1e6
    msbo_outer_steps: int = 200
    msbo_restarts: int = 2
    # evaluation and reference
    eval_initial_states: int = 40000
    eval_horizon: int = 50
    shared_eval: bool = False
    reference_n: int = 40000
    reference_iterations: int = 100
    # reporting
    ci_level: float = 0.75
    fit_on: str = "mean"                    # mean | points
    record_timing: bool = False

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ConfigError("n_grid must be positive and strictly increasing")
        if self.replications < 2:
            raise ConfigError("replications must be at least 2")
        if self.problem not in ("benchmark", "tabular"):
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.estimator not in ("fqi", "msbo"):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.fit_on not in ("mean", "points"):
            raise ConfigError("fit_on must be 'mean' or 'points'")
        if not 0 < self.ci_level < 1:
            raise ConfigError("ci_level must lie in (0, 1)")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be positive")
        if self.fqi_solver not in ("lstsq", "fallback"):
            raise ConfigError("fqi_solver must be 'lstsq' or 'fallback'")


@dataclass(frozen=True)
class MarginConfig:
    problem: str = "benchmark"
    gamma: float = 0.9
    benchmark_seed: int = SWEEP_BENCHMARK_SEED
    num_states: int = 5
    num_actions: int = 2
    tabular_seed: int = 0
    reward_bound: float = 1.0
    dirichlet_concentration: float = 1.0
    master_seed: int = 0
    reference_n: int = 40000
    reference_iterations: int = 100
    samples_per_policy: int = 20000
    random_policies: int = 8
    grid_points: int = 40
    grid_min: float = 1e-3
    grid_max: float = 1.0


# -- config files ---------------------------------------------------------

def _coerce(value: str, current):
    if isinstance(current, bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    if isinstance(current, tuple):
        return tuple(int(v) for v in value.replace("[", "").replace("]", "").replace(",", " ").split())
    if isinstance(current, int):
        return int(value, 0)
    if isinstance(current, float):
        return float(value)
    return value


def parse_config(text: str, cls=SweepConfig):
    """Parse ``key = value`` lines (``#`` comments) into ``cls``; unknown keys are errors."""
    defaults = cls()
    names = {f.name for f in dataclasses.fields(cls)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in names:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(value, getattr(defaults, key))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    try:
        return cls(**values)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def format_config(config) -> str:
    lines = []
    for f in dataclasses.fields(config):
        v = getattr(config, f.name)
        if isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# -- problem setup --------------------------------------------------------

@dataclass
class Problem:
    mdp: object
    feature_map: object
    behavior: object
    reference: GreedyPolicy
    cache: ReferenceValueCache | None = None


def build_mdp(config):
    if config.problem == "benchmark":
        mdp = build_benchmark(BenchmarkSpec(seed=config.benchmark_seed, gamma=config.gamma))
        return mdp, benchmark_features, benchmark_behavior
    mdp = random_tabular(config.tabular_seed, config.num_states, config.num_actions,
                         config.reward_bound, config.dirichlet_concentration, config.gamma)
    return (mdp, one_hot_features(config.num_states, config.num_actions),
            uniform_pair_behavior(config.num_states, config.num_actions))


def build_problem(config) -> Problem:
    mdp, features, behavior = build_mdp(config)
    if isinstance(mdp, TabularMdp):
        return Problem(mdp, features, behavior, reference_optimal(mdp))
    rng = make_rng(splitmix64(config.master_seed ^ REFERENCE_SALT))
    reference = reference_optimal(mdp, features, rng, behavior, n=config.reference_n,
                                  iterations=config.reference_iterations)
    return Problem(mdp, features, behavior, reference, ReferenceValueCache(mdp, reference))


def minority_action_share(benchmark_seed: int, master_seed: int = 0, grid: int = 100) -> float:
    """Fraction of a uniform grid on the square where the reference policy
    picks its less frequent action."""
    config = SweepConfig(benchmark_seed=benchmark_seed, master_seed=master_seed)
    problem = build_problem(config)
    g = (np.arange(grid) + 0.5) / grid
    states = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    share = float(np.mean(problem.reference(states) == 1))
    return min(share, 1.0 - share)


def eval_config(config: SweepConfig, cell_seed: int | None = None) -> EvalConfig:
    """Evaluation settings for one replication (or the shared sample)."""
    base = config.master_seed if config.shared_eval or cell_seed is None else cell_seed
    return EvalConfig(config.eval_initial_states, config.eval_horizon,
                      splitmix64(base ^ EVAL_SALT))


def fit_estimator(config: SweepConfig, problem: Problem, dataset, seed: int):
    """Returns (Q-function, iteration count) for the configured estimator."""
    mdp = problem.mdp
    if config.estimator == "fqi":
        fcfg = FqiConfig(iterations=config.fqi_iterations, ball_radius=config.ball_radius,
                         solver=config.fqi_solver)
        return fqi_fit(dataset, problem.feature_map, fcfg, mdp.gamma, mdp.num_actions), fcfg.iterations
    mcfg = MsboConfig(zeta=config.msbo_zeta, weight_bound=config.msbo_weight_bound,
                      witness_bound=config.msbo_witness_bound,
                      outer_steps=config.msbo_outer_steps, restarts=config.msbo_restarts,
                      seed=seed)
    sol = msbo_fit(dataset, problem.feature_map, mcfg, mdp.gamma, mdp.num_actions)
    q = LinearQFunction(sol.q_weights, problem.feature_map, mdp.num_actions, mcfg.weight_bound)
    return q, sol.iterations_used


# -- sweep ----------------------------------------------------------------

@dataclass
class RegretCurve:
    per_n: list
    slope: float
    slope_ci: tuple
    intercept: float
    degenerate: bool = False
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)


def _run_cell(config, problem, ev, n, rep):
    seed = replication_seed(config.master_seed, n, rep)
    t0 = time.perf_counter()
    rng = make_rng(seed)
    data = draw_dataset(problem.mdp, problem.behavior, n, rng, seed=seed)
    q, iters = fit_estimator(config, problem, data, seed)
    if config.shared_eval:
        est = estimate_regret(problem.mdp, GreedyPolicy(q), problem.reference, ev, problem.cache)
    else:
        est = estimate_regret(problem.mdp, GreedyPolicy(q), problem.reference,
                              eval_config(config, seed))
    wall = (time.perf_counter() - t0) * 1000 if config.record_timing else 0.0
    return {"n": n, "replication": rep, "seed": seed, "estimator": config.estimator,
            "K_or_steps": iters, "regret": est.regret, "v_star_hat": est.v_star_hat,
            "v_pi_hat": est.v_pi_hat, "std_error": est.std_error, "wall_time_ms": wall,
            "policy": GreedyPolicy(q)}


def _check_seed_collisions(config: SweepConfig):
    seeds = {replication_seed(config.master_seed, n, r)
             for n in config.n_grid for r in range(config.replications)}
    if len(seeds) != len(config.n_grid) * config.replications:
        raise SweepFailure("replication seed collision")


def run_cells(config: SweepConfig, problem: Problem | None = None):
    """Run every (n, replication) cell; returns (rows, failures) in grid order."""
    _check_seed_collisions(config)
    problem = problem or build_problem(config)
    ev = eval_config(config)
    if config.shared_eval and problem.cache is not None:
        problem.cache.returns(ev)           # warm before threads share it
    cells = [(n, r) for n in config.n_grid for r in range(config.replications)]

    def task(cell):
        n, r = cell
        try:
            return _run_cell(config, problem, ev, n, r)
        except Exception as exc:  # noqa: BLE001 - failures are counted, not fatal
            seed = replication_seed(config.master_seed, n, r)
            log.warning("replication n=%d rep=%d seed=%d failed: %s", n, r, seed, exc)
            return {"n": n, "replication": r, "seed": seed, "error": repr(exc)}

    if config.parallelism > 1:
        with ThreadPoolExecutor(config.parallelism) as pool:
            results = list(pool.map(task, cells))
    else:
        results = [task(c) for c in cells]
    rows = [r for r in results if "error" not in r]
    failures = [r for r in results if "error" in r]
    if len(failures) > 0.1 * len(cells):
        raise SweepFailure(f"{len(failures)} of {len(cells)} replications failed")
    return rows, failures


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        out = []
        for c in CSV_COLUMNS:
            v = row[c]
            out.append(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v))
        w.writerow(out)
    return buf.getvalue()


def csv_to_rows(text: str) -> list[dict]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append({"n": int(rec["n"]), "replication": int(rec["replication"]),
                     "seed": int(rec["seed"]), "estimator": rec["estimator"],
                     "K_or_steps": int(rec["K_or_steps"]), "regret": float(rec["regret"]),
                     "v_star_hat": float(rec["v_star_hat"]), "v_pi_hat": float(rec["v_pi_hat"]),
                     "std_error": float(rec["std_error"]),
                     "wall_time_ms": float(rec["wall_time_ms"])})
    return rows


def per_n_stats(rows, ci_level: float = 0.75) -> list[dict]:
    out = []
    for n in sorted({r["n"] for r in rows}):
        x = np.array([r["regret"] for r in rows if r["n"] == n])
        m = len(x)
        mean = math.fsum(x) / m
        se = float(np.std(x, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
        half = float(stats.t.ppf(0.5 + ci_level / 2, m - 1)) * se if m > 1 else 0.0
        out.append({"n": n, "count": m, "mean": mean, "median": float(np.median(x)),
                    "std_error": se, "ci_lo": mean - half, "ci_hi": mean + half})
    return out


def fit_slope(points, ci_level: float = 0.75):
    """OLS slope of log statistic on log n with a t-based confidence interval.

    Returns (slope, (lo, hi), intercept).  Points with a nonpositive statistic
    are dropped with a warning.
    """
    pts = [(float(n), float(v)) for n, v in points]
    kept = [(n, v) for n, v in pts if v > 0 and n > 0]
    if len(kept) < len(pts):
        log.warning("dropped %d nonpositive points from the log-log fit", len(pts) - len(kept))
    if len(kept) < 3:
        raise FitError("need at least three positive points for a slope fit")
    x = np.log([n for n, _ in kept])
    y = np.log([v for _, v in kept])
    res = stats.linregress(x, y)
    df = len(kept) - 2
    half = float(stats.t.ppf(0.5 + ci_level / 2, df)) * res.stderr
    return float(res.slope), (float(res.slope - half), float(res.slope + half)), float(res.intercept)


def curve_from_rows(rows, config: SweepConfig, failures=()) -> RegretCurve:
    per_n = per_n_stats(rows, config.ci_level)
    if config.fit_on == "mean":
        points = [(s["n"], s["mean"]) for s in per_n]
    else:
        points = [(r["n"], r["regret"]) for r in rows]
    try:
        slope, ci, intercept = fit_slope(points, config.ci_level)
        degenerate = False
    except FitError:
        slope, ci, intercept, degenerate = math.nan, (math.nan, math.nan), math.nan, True
    return RegretCurve(per_n, slope, ci, intercept, degenerate, list(rows), list(failures))


def run_sweep(config: SweepConfig, problem: Problem | None = None):
    """Run the sweep; returns (RegretCurve, CSV text)."""
    rows, failures = run_cells(config, problem)
    return curve_from_rows(rows, config, failures), rows_to_csv(rows)


def tabular_regime_report(config: SweepConfig, problem: Problem | None = None,
                          min_delta0: float = 0.0) -> list[dict]:
    """Fraction of replications whose greedy policy is exactly optimal, per n."""
    from .margin_analysis import DegenerateMarginError, tabular_delta0

    if config.problem != "tabular":
        raise ConfigError("the tabular regime report needs problem = tabular")
    problem = problem or build_problem(config)
    mdp = problem.mdp
    qstar = value_iteration(mdp, tol=1e-12)
    try:
        delta0 = tabular_delta0(qstar)
    except DegenerateMarginError:
        if mdp.num_actions > 1:
            raise
        delta0 = math.inf
    if delta0 < min_delta0:
        raise DegenerateMarginError(f"delta0 = {delta0:.4g} is below {min_delta0}")
    optimal = problem.reference.table(mdp.num_states)
    rows, _ = run_cells(config, problem)
    report = []
    for n in config.n_grid:
        cell = [r for r in rows if r["n"] == n]
        exact = [bool(np.array_equal(r["policy"].table(mdp.num_states), optimal)) for r in cell]
        report.append({"n": n, "replications": len(cell),
                       "fraction_optimal": sum(exact) / len(cell),
                       "fraction_zero_regret": sum(r["regret"] == 0.0 for r in cell) / len(cell),
                       "mean_regret": math.fsum(r["regret"] for r in cell) / len(cell)})
    return report


# -- margin profile -------------------------------------------------------

def probe_policies(reference: GreedyPolicy, feature_map, num_actions: int, k: int, rng):
    """The reference greedy policy plus ``k`` greedy policies of random Q-functions."""
    policies = [reference]
    for _ in range(k):
        if isinstance(reference.q, TabularQFunction):
            q = TabularQFunction(rng.standard_normal(reference.q.table.shape))
        else:
            q = LinearQFunction(rng.standard_normal(len(reference.q.weights)), feature_map,
                                num_actions)
        policies.append(GreedyPolicy(q))
    return policies


def margin_profile(config: MarginConfig):
    from .margin_analysis import estimate_profile

    mdp, features, behavior = build_mdp(config)
    rng = make_rng(splitmix64(config.master_seed ^ REFERENCE_SALT))
    if isinstance(mdp, TabularMdp):
        reference = reference_optimal(mdp)
    else:
        reference = reference_optimal(mdp, features, rng, behavior, n=config.reference_n,
                                      iterations=config.reference_iterations)
    policies = probe_policies(reference, features, mdp.num_actions, config.random_policies, rng)
    grid = np.geomspace(config.grid_min, config.grid_max, config.grid_points)
    return estimate_profile(mdp, reference.q, policies, config.samples_per_policy, grid, rng)
