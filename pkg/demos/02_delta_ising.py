# %% [markdown]
# # From least squares to spins
#
# Instead of encoding every symbol with spins, the delta formulation searches
# for a small even-integer correction `d = T s` around the rounded MMSE
# decision. With two spins per coordinate `d` takes values in {-2, 0, 2}.

# %%
import itertools

import numpy as np

from cim_mimo import make_constellation, modulate, sample_channel, transmit
from cim_mimo.detectors import mmse_detect, objective
from cim_mimo.ising import (
    DELTA_2,
    augment_linear,
    build_delta_problem,
    build_transform,
    ising_energy,
    recover_spins,
    spins_to_solution,
)
from cim_mimo.mimo import complex_to_real, symbols_to_real

rng = np.random.default_rng(4)
c = make_constellation(16)
cs = transmit(sample_channel(2, 2, rng), modulate(rng.integers(0, 2, 8), c), 8.0, c, rng)
rs = complex_to_real(cs, c)
guess = symbols_to_real(mmse_detect(cs, c)[1].symbols, c)
T = build_transform(DELTA_2, 2)
print("T =\n", T.astype(int))

# %% [markdown]
# The Ising energy plus a constant equals the residual norm for every spin
# vector, so minimizing one minimizes the other.

# %%
prob = build_delta_problem(rs, guess, DELTA_2)
r = rs.y - rs.H @ guess
for s in rng.choice([-1.0, 1.0], (3, T.shape[1])):
    print(f"{ising_energy(prob, s) + prob.offset:10.4f}  {np.sum((r - rs.H @ T @ s) ** 2):10.4f}")

# %% [markdown]
# The linear term is folded into couplings to one extra spin. Both halves of
# every flipped pair have the same energy; multiplying by the extra spin
# picks the right one.

# %%
aug = augment_linear(prob)
S = np.array(list(itertools.product([-1, 1], repeat=aug.n)), float)
E = ising_energy(aug, S)
best = S[np.argmin(E)]
s_hat = recover_spins(best[:-1], best[-1])
x_hat = spins_to_solution(s_hat, T, guess, c)
print("MMSE objective :", round(objective(cs, mmse_detect(cs, c)[1].symbols), 4))
print("delta optimum  :", round(objective(cs, x_hat), 4), x_hat)
