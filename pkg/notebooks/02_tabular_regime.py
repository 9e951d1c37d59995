# %% [markdown]
# # Tabular problems: regret hits exactly zero
#
# With finitely many states every positive action gap is bounded below, so
# once the estimation error is smaller than half the smallest gap the greedy
# policy is exactly optimal.  The fraction of replications with zero regret
# should climb to one.

# %%
from fastrates import random_tabular, tabular_delta0, value_iteration
from fastrates.experiment import SweepConfig, tabular_regime_report
from fastrates.theory_bounds import tabular_B, tabular_bounds, tabular_crossover

mdp = random_tabular(0, 5, 2)
q = value_iteration(mdp)
delta0 = tabular_delta0(q)
print("smallest positive gap", round(delta0, 4))

# %%
cfg = SweepConfig(problem="tabular", num_states=5, num_actions=2, tabular_seed=0,
                  n_grid=(10, 50, 200, 800, 3200), replications=50, fqi_solver="fallback")
for row in tabular_regime_report(cfg):
    print(row["n"], row["fraction_zero_regret"], f"{row['mean_regret']:.2e}")

# %% [markdown]
# The closed-form bounds tell the same story with enormous constants: the
# exponential bound only applies beyond a threshold sample size, and only
# beats the square-root baseline much later.

# %%
B = tabular_B(5, 2, 1.0, mdp.gamma)
lam = 1 / 10        # uniform behaviour over 10 state-action cells
for n in (1e6, 1e12, 1e18, 1e20):
    base, expo = tabular_bounds(5, 2, 1.0, B, mdp.gamma, lam, delta0, n)
    print(f"n={n:.0e}  baseline={base:.3e}  exponential={expo}")
print("crossover n", f"{tabular_crossover(5, 2, 1.0, B, mdp.gamma, lam, delta0):.3e}")
