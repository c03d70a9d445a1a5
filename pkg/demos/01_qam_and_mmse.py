# %% [markdown]
# # QAM symbols and the linear MMSE guess
#
# Constellations live on the odd-integer grid with per-axis Gray labels.
# A vector of symbols goes through a Rayleigh channel, and the MMSE
# detector gives the cheap first guess that everything else builds on.

# %%
import numpy as np

from cim_mimo import make_constellation, modulate, demodulate, sample_channel, transmit
from cim_mimo.detectors import mmse_detect, ml_oracle

rng = np.random.default_rng(1)
c = make_constellation(16)
print("levels per axis:", c.pam_levels, " average energy:", c.avg_energy)

# %% [markdown]
# Gray labelling: neighbours along an axis differ in exactly one bit.

# %%
for lvl in c.pam_levels:
    sym = np.array([lvl + 1j * c.pam_levels[0]])
    bits = demodulate(sym, c)
    print(f"{lvl:+d}  ->  I bits {bits[:2]}")

# %% [markdown]
# A 4x4 link at 12 dB. MMSE is close but not always exact; the exhaustive
# ML search is affordable at this size and gives the reference answer.

# %%
bits = rng.integers(0, 2, 4 * c.bits_per_symbol)
x = modulate(bits, c)
cs = transmit(sample_channel(4, 4, rng), x, 12.0, c, rng)
x_m, mm = mmse_detect(cs, c)
ml = ml_oracle(cs, c)
print("sent   :", x)
print("MMSE   :", mm.symbols, " objective", round(mm.objective, 3))
print("ML     :", ml.symbols, " objective", round(ml.objective, 3))
print("unrounded MMSE (real form):", np.round(x_m, 2))
