"""Delta-Ising MIMO detection on a simulated amplitude-corrected coherent Ising machine."""

__version__ = "0.1.0"

from .cim import AnnealResult, CimParams, anneal, default_params, epsilon_at, run_batch
from .coding import conv_encode, viterbi_decode
from .detectors import DetectionReport, Detector, ml_oracle, mmse_detect, objective, round_to_constellation
from .ising import (
    DELTA_2,
    DELTA_4,
    AugmentedIsing,
    DeltaSearchSpace,
    IsingProblem,
    augment_linear,
    build_delta_problem,
    build_direct_problem,
    build_transform,
    ising_energy,
    recover_spins,
    spins_to_solution,
)
from .link import (
    ExperimentConfig,
    ResultRow,
    amc_experiment,
    ber_experiment,
    detect_di_mimo,
    detect_direct,
    oracle_comparison,
    trajectory_capture,
)
from .mimo import (
    ComplexSystem,
    Constellation,
    RealSystem,
    complex_to_real,
    demodulate,
    make_constellation,
    modulate,
    real_to_complex_symbols,
    sample_channel,
    transmit,
)
