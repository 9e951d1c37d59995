# %% [markdown]
# # Regret of greedy FQI on the two-dimensional benchmark
#
# Draw offline datasets of growing size, fit linear FQI, and watch the regret
# of the greedy policy fall.  The log-log slope of mean regret against n is
# the quantity of interest: a slope near -1 is faster than the n^(-1/2) a
# naive error-propagation argument gives.
#
# This is a reduced run (few replications, small evaluation sample) so it
# finishes in a minute or two.

# %%
import numpy as np

from fastrates.experiment import SweepConfig, minority_action_share, run_sweep

# %% [markdown]
# The benchmark instance is chosen so both actions are optimal somewhere on
# the state square; otherwise every policy is optimal and regret is zero.

# %%
cfg = SweepConfig(replications=12, eval_initial_states=2000, reference_n=20000)
print("benchmark seed", cfg.benchmark_seed,
      "minority-action share", round(minority_action_share(cfg.benchmark_seed), 3))

# %%
curve, csv_text = run_sweep(cfg)
for s in curve.per_n:
    print(f"n={s['n']:4d}  mean={s['mean']:.5f}  median={s['median']:.5f}  se={s['std_error']:.5f}")

# %% [markdown]
# Slope of log mean regret on log n, with a 75% interval.  With a dozen
# replications the interval is wide; the acceptance suite uses 70.

# %%
lo, hi = curve.slope_ci
print(f"slope {curve.slope:.3f}   75% CI [{lo:.3f}, {hi:.3f}]")

# %%
print(csv_text.splitlines()[0])
print(csv_text.splitlines()[1])
