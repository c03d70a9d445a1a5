# %% [markdown]
# # Uncoded BER: MMSE against DI-MIMO
#
# A small sweep on an 8x8 16-QAM link. Every detector sees the same bits,
# channels and noise, so the comparison is paired. Takes under a minute.

# %%
from cim_mimo.link import ExperimentConfig, ber_experiment

cfg = ExperimentConfig(n_tx=8, n_rx=8, modulation=16, snr_grid_db=(10.0, 15.0, 20.0, 25.0),
                       total_bits=20_000, n_anneals=32, detectors=("MMSE", "DI"))
rows = ber_experiment(cfg)

# %%
print("SNR    MMSE       DI")
for snr in cfg.snr_grid_db:
    ber = {r.detector: r.ber for r in rows if r.snr_db == snr}
    print(f"{snr:4.0f}   {ber['MMSE']:.2e}   {ber['DI']:.2e}")

# %% [markdown]
# The same run is available from the command line:
#
#     cim-mimo ber --nt 8 --mod 16 --snr 10:5:25 --bits 20000 --na 32
