# %% [markdown]
# Where does the squeezing noise go?
#
# A lossy squeezed state is mixed; the same state can be written as a purer
# squeezed state with noise in x, in p, or split between them. Eve may pick
# the split. This script scans the split and reports the worst key.

# %%
import numpy as np

from squeezed_cvqkd.protocol import noisy_state_from_loss
from squeezed_cvqkd.security import allocation_key, worst_case_allocation

Vx = 10.0
for Vs, eta in ((0.1, 0.9), (0.1, 0.5)):
    state = noisy_state_from_loss(Vs, eta)
    print(f"Vs={Vs} eta={eta}: var_x={state.var_x:.3f} var_p={state.var_p:.3f} purity={state.purity:.3f}")
    for side in ("RR", "DR"):
        splits = np.linspace(0.0, state.max_eps_x, 6)
        keys = [allocation_key(state, Vx, float(e), side) for e in splits]
        eps_x, worst = worst_case_allocation(state, Vx, side)
        print(f"  {side}: keys over the split " + " ".join(f"{k:+.4f}" for k in keys)
              + f"  worst {worst:+.4f} at eps_x={eps_x:.4f}")

# %% [markdown]
# Ratio of the worst-case key to the key of a model that puts all noise in
# x, as the loss that produced the state grows. Only points where the
# reference key is positive are kept.

# %%
for side in ("RR", "DR"):
    ratios = []
    for eta in np.linspace(0.9, 0.99, 10):
        state = noisy_state_from_loss(0.1, eta)
        base = allocation_key(state, Vx, state.max_eps_x, side)
        _, worst = worst_case_allocation(state, Vx, side)
        if base > 0:
            ratios.append(worst / base)
    print(side, "ratios", " ".join(f"{r:.3f}" for r in ratios))
