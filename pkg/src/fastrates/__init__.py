"""Offline RL estimators, margin analysis and regret-rate bounds.

Linear fitted Q-iteration and MSBO fit Q-functions from logged transitions;
their greedy policies are evaluated against a reference optimum, and the
observed regret curves can be compared with closed-form rate bounds.
"""
from .data_gen import Dataset, DesignStats, design_stats, draw_dataset
from .fqi import (FqiConfig, GreedyPolicy, LinearQFunction, TabularQFunction, fqi_fit,
                  greedy_action, min_iterations)
from .margin_analysis import (MarginProfile, estimate_profile, linear_delta0, margin_at,
                              occupancy_sample, tabular_delta0)
from .mdp_core import (LinearMdp, TabularMdp, Trajectory, bellman_backup, exact_occupancy,
                       exact_policy_value, sample_trajectory, value_iteration)
from .msbo import MsboConfig, MsboSolution, inner_max, msbo_fit
from .policy_eval import (EvalConfig, RegretEstimate, estimate_regret, mc_policy_value,
                          reference_optimal)
from .synthetic_benchmark import (BenchmarkSpec, benchmark_behavior, benchmark_features,
                                  build_benchmark, make_rng, one_hot_features, random_tabular,
                                  uniform_pair_behavior)

__version__ = "0.1.0"
