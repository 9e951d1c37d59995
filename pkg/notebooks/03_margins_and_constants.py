# %% [markdown]
# # Margins and the constants in the fast-rate bounds

# %%
import numpy as np

from fastrates.experiment import MarginConfig, margin_profile
from fastrates.theory_bounds import RateConstants, c_alpha, cor7_bounds, fqi_an

# %% [markdown]
# Empirical margin profile on the benchmark: the probability, under the
# occupancy of several policies, that the action gap is positive but below
# delta.  A power law delta^alpha near zero is the margin condition.

# %%
prof = margin_profile(MarginConfig(samples_per_policy=10000))
print(prof.to_json())
for d, c in list(zip(prof.delta_grid, prof.cdf_values))[::8]:
    print(f"delta={d:.4f}  cdf={c:.4f}")

# %% [markdown]
# The series constant c(alpha) and its closed-form upper bound.

# %%
for alpha in (0, 0.5, 1, 2, 5, 10):
    series, upper, terms = c_alpha(alpha)
    print(f"alpha={alpha:>4}  series={series:.6g}  upper={upper:.6g}  terms={terms}")

# %% [markdown]
# Polynomial-regime bound for FQI with alpha = 1: it falls like 1/n.

# %%
k = RateConstants(alpha=1.0, delta0=0.5, d=6, M=1.0, B=10.0, lambda0=0.1, gamma=0.9)
for n in np.logspace(4, 12, 5):
    print(f"n={n:.0e}  a_n={fqi_an(n, 6, 1.0, 10.0, 0.9, 0.1):.3e}  bound={cor7_bounds(k, n):.3e}")
