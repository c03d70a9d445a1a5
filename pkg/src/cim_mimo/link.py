"""DI-MIMO detection pipeline and link-level BER / throughput experiments.

Every experiment is a pure function of its configuration. Each transmission
instance draws its bits, channel and noise from a generator keyed on
``(master_seed, stream, instance)`` and its anneals from seeds keyed the same
way, so results do not depend on how instances are scheduled across threads.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cim import CimParams, batch_initial_states, integrate, spin_signs
from .coding import RATES, coded_length, conv_encode, parse_rate, viterbi_decode
from .detectors import (
    DetectionReport,
    Detector,
    ORACLE_MAX_BITS,
    _round_levels,
    ml_oracle,
    mmse_detect,
    objective,
)
from .ising import (
    DELTA_2,
    DeltaSearchSpace,
    _weighted_identity,
    augment_linear,
    build_delta_problem,
    build_direct_problem,
    pam_transform,
)
from .mimo import (
    ComplexSystem,
    Constellation,
    complex_to_real,
    demodulate,
    make_constellation,
    modulate,
    real_to_symbols,
    sample_channel,
    symbols_to_real,
    transmit,
)

THREADS_ENV = "CIM_MIMO_THREADS"

# stream tags for seed derivation
_BER_STREAM = 1
_AMC_STREAM = 2
_ORACLE_STREAM = 3
_TRAJECTORY_STREAM = 4
_ANNEAL_STREAM = 7


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def worker_count() -> int:
    """Thread cap from ``CIM_MIMO_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a non-negative integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0")
    return n or (os.cpu_count() or 1)


def _parallel_map(fn, items, workers: int | None = None) -> list:
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------------------
# detection pipelines


def _pool_select(cs: ComplexSystem, c: Constellation, cand_real: np.ndarray,
                 fallback: DetectionReport | None, tag: Detector) -> DetectionReport:
    """Minimum-objective member of the pool; first occurrence wins, fallback last.

    Every objective goes through :func:`objective` so comparisons with other
    detectors' reports are exact.
    """
    best = None
    if cand_real.shape[0]:
        rounded = _round_levels(cand_real, c.max_level)
        _, first = np.unique(rounded, axis=0, return_index=True)
        for i in np.sort(first):
            syms = real_to_symbols(rounded[i], c)
            obj = objective(cs, syms)
            if best is None or obj < best[0]:
                best = (obj, syms, cand_real[i])
    if fallback is not None and (best is None or not best[0] <= fallback.objective):
        return DetectionReport(fallback.symbols, fallback.real_solution, fallback.objective, tag)
    if best is None:
        raise RuntimeError("empty candidate pool")
    return DetectionReport(best[1], best[2], best[0], tag)


def _anneal_candidates(J: np.ndarray, T: np.ndarray, center: np.ndarray, params: CimParams,
                       n_anneals: int, seed) -> np.ndarray:
    """Decoded real-domain candidates ``center + T (s_bar * s_a)`` of surviving anneals."""
    x0, e0 = batch_initial_states(J.shape[0], n_anneals, params, seed)
    x, _, _, _, _ = integrate(J, x0, e0, params)
    ok = np.all(np.isfinite(x), axis=1)
    s = spin_signs(x[ok]).astype(float)
    s_hat = s[:, :-1] * s[:, -1:]
    return center + s_hat @ T.T


def detect_di_mimo(
    cs: ComplexSystem,
    c: Constellation,
    space: DeltaSearchSpace = DELTA_2,
    params: CimParams | None = None,
    n_anneals: int = 64,
    seed=0,
    *,
    mmse: tuple[np.ndarray, DetectionReport] | None = None,
    center: str = "rounded",
) -> DetectionReport:
    """Delta-Ising detection around the MMSE hard decision.

    The correction search is centred on the rounded MMSE solution
    (``center="raw"`` uses the unrounded linear estimate instead). The
    candidate pool is the decoded final state of every anneal that stayed
    finite, followed by the MMSE decision; the best objective wins. If every
    anneal fails, the MMSE decision is returned.
    """
    params = params or CimParams()
    x_m, mmse_report = mmse if mmse is not None else mmse_detect(cs, c)
    rs = complex_to_real(cs, c)
    if center == "rounded":
        guess = symbols_to_real(mmse_report.symbols, c)
    elif center == "raw":
        guess = np.asarray(x_m, dtype=float)
    else:
        raise ValueError(f"unknown center {center!r}")
    prob = augment_linear(build_delta_problem(rs, guess, space))
    T = _weighted_identity(space.weights, rs.H.shape[1])
    cand = _anneal_candidates(prob.J, T, guess, params, n_anneals, seed)
    return _pool_select(cs, c, cand, mmse_report, Detector.DI)


def detect_direct(
    cs: ComplexSystem,
    c: Constellation,
    params: CimParams | None = None,
    n_anneals: int = 64,
    seed=0,
    *,
    include_mmse: bool = True,
    mmse: tuple[np.ndarray, DetectionReport] | None = None,
) -> DetectionReport:
    """Direct spin encoding of the PAM coordinates, solved on the same CIM.

    The rounded MMSE decision joins the pool unless ``include_mmse`` is off.
    """
    params = params or CimParams()
    rs = complex_to_real(cs, c)
    prob = augment_linear(build_direct_problem(rs, c))
    T = pam_transform(c, rs.H.shape[1])
    cand = _anneal_candidates(prob.J, T, np.zeros(rs.H.shape[1]), params, n_anneals, seed)
    fallback = None
    if include_mmse or cand.shape[0] == 0:
        fallback = (mmse if mmse is not None else mmse_detect(cs, c))[1]
    return _pool_select(cs, c, cand, fallback, Detector.DIRECT)


# --------------------------------------------------------------------------
# experiment configuration and results


@dataclass
class ExperimentConfig:
    """Scenario description shared by the BER, AMC and oracle experiments.

    ``modulation`` drives BER runs; ``modulations`` x ``code_rates`` is the
    AMC menu. ``total_bits`` is rounded up to whole vector symbols.
    """

    n_tx: int = 16
    n_rx: int = 16
    modulation: int = 16
    snr_grid_db: tuple[float, ...] = (10.0,)
    total_bits: int = 100_000
    n_anneals: int = 64
    delta_levels: tuple[int, ...] = (-2, 0, 2)
    detectors: tuple[str, ...] = ("MMSE", "DI")
    master_seed: int = 0
    block_len: int = 1024
    blocks: int = 200
    modulations: tuple[int, ...] = (2, 4, 16, 64, 256)
    code_rates: tuple[str, ...] = ("1/3", "1/2", "2/3")
    instances: int = 100
    params: CimParams = field(default_factory=CimParams)

    def validate(self):
        if self.n_tx < 1 or self.n_rx < self.n_tx:
            raise ValueError("need 1 <= n_tx <= n_rx")
        if self.total_bits < 1 or self.n_anneals < 1 or self.blocks < 1 or self.block_len < 1:
            raise ValueError("bits, anneals, blocks and block_len must be positive")
        for d in self.detectors:
            Detector(d)
        DeltaSearchSpace.from_levels(self.delta_levels)
        make_constellation(self.modulation)
        for m in self.modulations:
            make_constellation(m)
        for r in self.code_rates:
            parse_rate(r)

    @property
    def space(self) -> DeltaSearchSpace:
        return DeltaSearchSpace.from_levels(self.delta_levels)


@dataclass
class ResultRow:
    detector: str
    modulation: int | str
    snr_db: float
    ber: float | None = None
    bler: float | None = None
    throughput: float | None = None
    code_rate: str = ""
    instances: int = 0
    bits: int = 0
    seed: int = 0


def _run_detectors(cs: ComplexSystem, c: Constellation, names, cfg: ExperimentConfig, anneal_seed) -> dict:
    mm = mmse_detect(cs, c)
    out = {}
    for name in names:
        tag = Detector(name)
        if tag is Detector.MMSE:
            out[name] = mm[1]
        elif tag is Detector.DI:
            out[name] = detect_di_mimo(cs, c, cfg.space, cfg.params, cfg.n_anneals, anneal_seed, mmse=mm)
        elif tag is Detector.DIRECT:
            out[name] = detect_direct(cs, c, cfg.params, cfg.n_anneals, anneal_seed, mmse=mm)
        else:
            out[name] = ml_oracle(cs, c)
    return out


def random_instance(cfg: ExperimentConfig, c: Constellation, snr_db: float, index: int = 0):
    """Random bits and received system for instance ``index`` of the trajectory stream."""
    rng = _rng(cfg.master_seed, _TRAJECTORY_STREAM, index)
    bits = rng.integers(0, 2, cfg.n_tx * c.bits_per_symbol)
    cs = transmit(sample_channel(cfg.n_tx, cfg.n_rx, rng), modulate(bits, c), snr_db, c, rng)
    return bits, cs


# --------------------------------------------------------------------------
# uncoded BER


def ber_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """Uncoded BER of every configured detector over the SNR grid.

    One independent Rayleigh channel per vector symbol. All detectors see the
    same bits, channels and noise; the standard-normal noise draws are shared
    across SNR points and only rescaled.
    """
    cfg.validate()
    c = make_constellation(cfg.modulation)
    if "ORACLE" in cfg.detectors and cfg.n_tx * c.bits_per_symbol > ORACLE_MAX_BITS:
        raise ValueError("ORACLE detector exceeds the enumeration budget for this configuration")
    bits_per_vec = cfg.n_tx * c.bits_per_symbol
    n_inst = math.ceil(cfg.total_bits / bits_per_vec)
    names = list(cfg.detectors)

    def one(job):
        si, snr, i = job
        rng = _rng(cfg.master_seed, _BER_STREAM, i)
        bits = rng.integers(0, 2, bits_per_vec)
        H = sample_channel(cfg.n_tx, cfg.n_rx, rng)
        cs = transmit(H, modulate(bits, c), snr, c, rng)
        reports = _run_detectors(cs, c, names, cfg, (cfg.master_seed, _ANNEAL_STREAM, si, i))
        return [int(np.count_nonzero(demodulate(reports[n].symbols, c) != bits)) for n in names]

    errors = np.zeros((len(cfg.snr_grid_db), len(names)), dtype=np.int64)
    for si, snr in enumerate(cfg.snr_grid_db):
        counts = _parallel_map(one, [(si, snr, i) for i in range(n_inst)])
        errors[si] = np.sum(counts, axis=0)
    total = n_inst * bits_per_vec
    return [
        ResultRow(name, cfg.modulation, float(snr), ber=errors[si, di] / total,
                  instances=n_inst, bits=total, seed=cfg.master_seed)
        for di, name in enumerate(names)
        for si, snr in enumerate(cfg.snr_grid_db)
    ]


# --------------------------------------------------------------------------
# coded blocks and oracle AMC


def throughput(n_tx: int, c: Constellation, rate, bler: float) -> float:
    """Delivered information bits per channel use, summed over users."""
    return n_tx * c.bits_per_symbol * float(parse_rate(rate)) * (1.0 - bler)


def coded_block_errors(cfg: ExperimentConfig, c: Constellation, rate, snr_db: float, key: tuple) -> dict:
    """Simulate ``cfg.blocks`` coded blocks; return failed-block counts per detector.

    Per block: encode, interleave with a seeded permutation, pad the last
    vector symbol with random bits, transmit over fresh Rayleigh channels,
    detect, deinterleave and Viterbi-decode the hard bits.
    """
    rate = parse_rate(rate)
    names = list(cfg.detectors)
    n_coded = coded_length(cfg.block_len, rate)
    bits_per_vec = cfg.n_tx * c.bits_per_symbol
    n_vec = math.ceil(n_coded / bits_per_vec)

    def one(b):
        rng = _rng(cfg.master_seed, _AMC_STREAM, *key, b)
        info = rng.integers(0, 2, cfg.block_len).astype(np.uint8)
        coded = conv_encode(info, rate)
        perm = rng.permutation(n_coded)
        stream = np.concatenate([coded[perm], rng.integers(0, 2, n_vec * bits_per_vec - n_coded)])
        rx = {n: np.empty(stream.size, dtype=np.uint8) for n in names}
        for v in range(n_vec):
            sl = slice(v * bits_per_vec, (v + 1) * bits_per_vec)
            H = sample_channel(cfg.n_tx, cfg.n_rx, rng)
            cs = transmit(H, modulate(stream[sl], c), snr_db, c, rng)
            reports = _run_detectors(cs, c, names, cfg, (cfg.master_seed, _ANNEAL_STREAM, *key, b, v))
            for n in names:
                rx[n][sl] = demodulate(reports[n].symbols, c)
        out = []
        for n in names:
            deint = np.empty(n_coded, dtype=np.uint8)
            deint[perm] = rx[n][:n_coded]
            out.append(deint)
        return info, out

    results = _parallel_map(one, range(cfg.blocks))
    info = np.stack([r[0] for r in results])
    errs = {}
    for k, n in enumerate(names):
        decoded = viterbi_decode(np.stack([r[1][k] for r in results]), rate, cfg.block_len)
        errs[n] = int(np.count_nonzero(np.any(decoded != info, axis=1)))
    return errs


def _rate_str(r) -> str:
    r = parse_rate(r)
    return f"{r.numerator}/{r.denominator}"


def amc_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """Throughput of every (modulation, code rate) pair plus the oracle-AMC envelope.

    Rows for each detector and SNR: one per menu entry, then one envelope row
    with ``modulation="AMC"`` carrying the selected pair's code rate and BLER.
    The envelope takes the first maximizer in menu order.
    """
    cfg.validate()
    rows: list[ResultRow] = []
    menu = [(m, _rate_str(r)) for m in cfg.modulations for r in cfg.code_rates]
    for snr_i, snr in enumerate(cfg.snr_grid_db):
        per_det: dict[str, list[ResultRow]] = {n: [] for n in cfg.detectors}
        for m, r in menu:
            c = make_constellation(m)
            key = (snr_i, m, Fraction(r).numerator, Fraction(r).denominator)
            errs = coded_block_errors(cfg, c, r, snr, key)
            for n in cfg.detectors:
                bler = errs[n] / cfg.blocks
                per_det[n].append(ResultRow(n, m, float(snr), bler=bler, throughput=throughput(cfg.n_tx, c, r, bler),
                                            code_rate=r, instances=cfg.blocks, bits=cfg.blocks * cfg.block_len,
                                            seed=cfg.master_seed))
        for n in cfg.detectors:
            rows.extend(per_det[n])
            best = max(per_det[n], key=lambda row: row.throughput)  # first maximizer
            rows.append(ResultRow(n, "AMC", float(snr), bler=best.bler, throughput=best.throughput,
                                  code_rate=best.code_rate, instances=cfg.blocks, bits=best.bits,
                                  seed=cfg.master_seed))
    return rows


def amc_envelope(rows: list[ResultRow], detector: str) -> dict[float, float]:
    return {r.snr_db: r.throughput for r in rows if r.detector == detector and r.modulation == "AMC"}


# --------------------------------------------------------------------------
# oracle comparison and trajectories


@dataclass
class OracleRow:
    instance: int
    obj_mmse: float
    obj_di: float
    obj_oracle: float

    @property
    def match(self) -> bool:
        return self.obj_di == self.obj_oracle


def oracle_comparison(cfg: ExperimentConfig, snr_db: float | None = None) -> list[OracleRow]:
    """Per-instance MMSE / DI / exhaustive-ML objectives at one SNR."""
    cfg.validate()
    c = make_constellation(cfg.modulation)
    if cfg.n_tx * c.bits_per_symbol > ORACLE_MAX_BITS:
        raise ValueError(f"oracle budget exceeded: N_t*log2(M) must be <= {ORACLE_MAX_BITS}")
    snr = cfg.snr_grid_db[0] if snr_db is None else snr_db

    def one(i):
        rng = _rng(cfg.master_seed, _ORACLE_STREAM, i)
        bits = rng.integers(0, 2, cfg.n_tx * c.bits_per_symbol)
        cs = transmit(sample_channel(cfg.n_tx, cfg.n_rx, rng), modulate(bits, c), snr, c, rng)
        mm = mmse_detect(cs, c)
        di = detect_di_mimo(cs, c, cfg.space, cfg.params, cfg.n_anneals,
                            (cfg.master_seed, _ANNEAL_STREAM, i), mmse=mm)
        return OracleRow(i, mm[1].objective, di.objective, ml_oracle(cs, c).objective)

    return _parallel_map(one, range(cfg.instances))


@dataclass
class TrajectoryTrace:
    """Decoded I/Q values of every user at every integration step.

    ``iq`` has shape ``(steps + 1, N_t, 2)`` and holds the unrounded decoded
    coordinates; ``x`` the raw amplitudes of all spins (auxiliary last).
    """

    formulation: str
    t: np.ndarray
    iq: np.ndarray
    x: np.ndarray


def trajectory_capture(
    cs: ComplexSystem,
    c: Constellation,
    formulations=("DI", "DIRECT"),
    params: CimParams | None = None,
    seed=0,
    space: DeltaSearchSpace = DELTA_2,
) -> dict[str, TrajectoryTrace]:
    """One traced anneal per formulation.

    Each formulation starts from anneal 0 of ``batch_initial_states(.., seed)``,
    so equal-sized problems share their initial condition exactly.
    """
    params = params or CimParams()
    rs = complex_to_real(cs, c)
    n_coords = rs.H.shape[1]
    traces = {}
    for form in formulations:
        tag = Detector(form)
        if tag is Detector.DI:
            guess = symbols_to_real(mmse_detect(cs, c)[1].symbols, c)
            prob = augment_linear(build_delta_problem(rs, guess, space))
            T = _weighted_identity(space.weights, n_coords)
        elif tag is Detector.DIRECT:
            guess = np.zeros(n_coords)
            prob = augment_linear(build_direct_problem(rs, c))
            T = pam_transform(c, n_coords)
        else:
            raise ValueError(f"no trajectory for formulation {form!r}")
        x0, e0 = batch_initial_states(prob.n, 1, params, seed)
        _, _, _, xs, _ = integrate(prob.J, x0, e0, params, capture_trace=True)
        xs = xs[:, 0]
        s = spin_signs(xs).astype(float)
        vals = guess + (s[:, :-1] * s[:, -1:]) @ T.T
        iq = np.zeros((xs.shape[0], cs.n_tx, 2))
        iq[:, :, 0] = vals[:, : cs.n_tx]
        if not c.is_real:
            iq[:, :, 1] = vals[:, cs.n_tx:]
        t = np.arange(xs.shape[0]) * params.dt
        traces[tag.value] = TrajectoryTrace(tag.value, t, iq, xs)
    return traces


__all__ = [
    "RATES",
    "ExperimentConfig",
    "OracleRow",
    "ResultRow",
    "TrajectoryTrace",
    "amc_envelope",
    "amc_experiment",
    "ber_experiment",
    "coded_block_errors",
    "detect_di_mimo",
    "detect_direct",
    "oracle_comparison",
    "random_instance",
    "throughput",
    "trajectory_capture",
    "worker_count",
]
