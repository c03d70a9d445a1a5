# %% [markdown]
# # Coded throughput with oracle link adaptation
#
# Blocks of 1024 bits are convolutionally coded, interleaved, sent through
# the MIMO channel, detected and Viterbi-decoded. For every SNR the oracle
# picks the (modulation, code rate) pair with the highest goodput. This is a
# cut-down version (4x4, 20 blocks) that runs in about a minute.

# %%
from cim_mimo.link import ExperimentConfig, amc_envelope, amc_experiment

cfg = ExperimentConfig(n_tx=4, n_rx=8, snr_grid_db=(5.0, 15.0), blocks=20, n_anneals=16,
                       modulations=(4, 16, 64), detectors=("MMSE", "DI"))
rows = amc_experiment(cfg)

# %%
for det in cfg.detectors:
    for r in rows:
        if r.detector == det and r.modulation == "AMC":
            print(f"{det:5s} {r.snr_db:5.1f} dB  {r.throughput:6.2f} bits/use  (rate {r.code_rate}, BLER {r.bler:.2f})")

mm, di = amc_envelope(rows, "MMSE"), amc_envelope(rows, "DI")
for snr in cfg.snr_grid_db:
    print(f"{snr:5.1f} dB  DI/MMSE = {di[snr] / mm[snr]:.2f}" if mm[snr] else f"{snr:5.1f} dB  MMSE delivers nothing")
