# %% [markdown]
# # Spin amplitudes on the simulated Ising machine
#
# The machine is an ODE. Amplitudes start near zero, the feedback ramps up
# linearly and the error variables keep pushing amplitudes off bad states.
# Here the same instance is solved with the delta formulation and with the
# direct encoding of the 16-QAM coordinates, from the same initial state.

# %%
import numpy as np

from cim_mimo import make_constellation
from cim_mimo.cim import default_params
from cim_mimo.link import ExperimentConfig, random_instance, trajectory_capture
from cim_mimo.detectors import ml_oracle

c = make_constellation(16)
cfg = ExperimentConfig(n_tx=4, n_rx=4, modulation=16)
bits, cs = random_instance(cfg, c, 10.0)
params = default_params()
traces = trajectory_capture(cs, c, ("DI", "DIRECT"), params, seed=0)

# %% [markdown]
# Decoded I/Q of user 0 every 32 steps. The delta trace can only move 2 per
# axis away from the MMSE guess, while the direct trace may sit anywhere on
# the grid. Both lock in early, once the feedback ramp has grown.

# %%
print(" step    DI (I, Q)      direct (I, Q)")
for k in range(0, params.steps + 1, 32):
    di = traces["DI"].iq[k, 0]
    dr = traces["DIRECT"].iq[k, 0]
    print(f"{k:5d}   {di[0]:+.0f} {di[1]:+.0f}          {dr[0]:+.0f} {dr[1]:+.0f}")

ml = ml_oracle(cs, c).symbols
print("ML solution for user 0:", ml[0])

# %% [markdown]
# Amplitude statistics at the end of the anneal.

# %%
for name, tr in traces.items():
    x = tr.x[-1]
    print(f"{name:7s} mean |x| = {np.mean(np.abs(x)):.3f}, min |x| = {np.min(np.abs(x)):.3f}")
