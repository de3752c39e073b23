# %% [markdown]
# Channel-noise tolerance against loss
#
# The largest excess noise that still leaves a positive key, with the
# modulation re-optimized at each probe. Trusted anti-squeezed noise helps
# direct reconciliation; the same amount left untrusted costs tolerance in
# reverse reconciliation.

# %%
import numpy as np

from squeezed_cvqkd.exceptions import NoPositiveKey
from squeezed_cvqkd.optimize import OptimizationProblem, ToleranceQuery, solve_tolerance
from squeezed_cvqkd.protocol import db_to_transmittance


def tolerance(**fixed):
    inner = OptimizationProblem(fixed=fixed, free=("Vx",))
    try:
        return solve_tolerance(ToleranceQuery(axis="eps", inner=inner)).value
    except NoPositiveKey:
        return 0.0


losses = np.arange(0.0, 11.0, 2.0)
print(f"{'loss dB':>7} {'DR dVt=0':>9} {'DR dVt=10':>10} {'RR dVt=0.5':>11} {'RR dVu=0.5':>11}")
for db in losses:
    T = float(db_to_transmittance(db))
    row = [tolerance(V=0.5, T=T, side="DR"), tolerance(V=0.5, T=T, side="DR", dV_trusted=10.0),
           tolerance(V=0.5, T=T, side="RR", dV_trusted=0.5),
           tolerance(V=0.5, T=T, side="RR", dV_untrusted=0.5)]
    print(f"{db:7.1f} " + " ".join(f"{v:10.4f}" for v in row))

# %% [markdown]
# Transmittance fluctuations narrow the tolerance further.

# %%
for var in (0.0, 0.01, 0.02):
    inner = OptimizationProblem(objective="fading", fixed=dict(V=0.5, T=0.5, side="RR", var_sqrtT=var),
                                free=("Vx",))
    tol = solve_tolerance(ToleranceQuery(axis="eps", objective="fading", inner=inner))
    print(f"Var(sqrt T) = {var:.2f}: eps tolerance {tol.value:.4f}")
