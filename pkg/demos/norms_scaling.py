"""Initial-data norms along a geometric sweep of the frequency scale N.

The velocity u0 shrinks like 1/ln ln N in the critical space while b0 shrinks
like N^(1/q - alpha).  Every amplitude here is far below double range, so all
numbers are carried as log2 values by the sparse path.
"""
# %%
import math

import numpy as np

from besovlab import ConstructionParams, build_initial_data, initial_norm_report
from besovlab.picard import loglog_fit

Ns = [2**k for k in range(8, 17)]

# %% one report per N
rows = []
for N in Ns:
    rep = initial_norm_report(build_initial_data(ConstructionParams(N=N)))
    pick = {(r["field"], r["s"], r["q"]): r for r in rep["quantities"]}
    u = pick[("u0", 0.0, 2.0)]
    b = pick[("b0", 1.0, 2.0)]
    rows.append((N, u["value"], b["value"]))
    print(f"N={N:6d}  |u0|={u['value']:.4e}  |b0|={b['value']:.4e}  log2 ratio u0/bound={u['log2_ratio']:+.3f}")

# %% the u0 ratio against 1/lnlnN stays bounded, b0 follows a power law
N, u, b = (np.array(c, float) for c in zip(*rows))
print("u0 * lnlnN:", np.round(u * np.log(np.log(N)), 4))
print("fitted b0 slope: %.4f (1/q - alpha = %.2f)" % (loglog_fit(N, b)[0], 0.5 - 0.75))
# The slope sits below -0.25 because lambda = 1/lnlnN shrinks along the sweep.
lam = 1 / np.log(np.log(N))
print("lambda range: %.3f .. %.3f" % (lam.max(), lam.min()))
