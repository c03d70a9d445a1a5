"""Linear MMSE guess, hard rounding, objective evaluation and the exhaustive ML oracle."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .mimo import (
    ComplexSystem,
    Constellation,
    complex_to_real,
    real_to_symbols,
    symbols_to_real,
)

ORACLE_MAX_BITS = 24


class Detector(str, enum.Enum):
    MMSE = "MMSE"
    DI = "DI"
    DIRECT = "DIRECT"
    ORACLE = "ORACLE"


@dataclass
class DetectionReport:
    """Hard decision of one detector on one channel use.

    ``real_solution`` is the real-domain vector before rounding (for the MMSE
    detector this is the linear estimate itself).
    """

    symbols: np.ndarray
    real_solution: np.ndarray
    objective: float
    detector_tag: Detector


class NumericalFailure(RuntimeError):
    pass


def objective(cs: ComplexSystem, x) -> float:
    """Squared Euclidean distance ``||y - H x||^2``."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (cs.n_tx,):
        raise ValueError(f"expected {cs.n_tx} symbols, got shape {x.shape}")
    r = cs.y - cs.H @ x
    return float(np.vdot(r, r).real)


def round_to_constellation(x, c: Constellation) -> np.ndarray:
    """Snap every real coordinate to the nearest PAM level and return complex symbols.

    Coordinates outside the grid clamp to ``±(sqrt(M) - 1)``. A coordinate
    exactly between two levels goes to the level of smaller magnitude; the
    tie at 0 goes to the negative level.
    """
    x = np.asarray(x, dtype=float)
    if not c.is_real and x.size % 2:
        raise ValueError("real vector must have even length")
    return real_to_symbols(_round_levels(x, c.max_level), c)


def _round_levels(x: np.ndarray, max_level: int) -> np.ndarray:
    lo = 2.0 * np.floor((x - 1.0) / 2.0) + 1.0
    hi = lo + 2.0
    d_lo = x - lo
    d_hi = hi - x
    tie_to_hi = (d_lo == d_hi) & (np.abs(hi) < np.abs(lo))
    out = np.where((d_hi < d_lo) | tie_to_hi, hi, lo)
    return np.clip(out, -max_level, max_level)


def mmse_detect(cs: ComplexSystem, c: Constellation) -> tuple[np.ndarray, DetectionReport]:
    """LMMSE estimate ``(H^H H + sigma^2/E_s I)^-1 H^H y`` and its hard decision.

    Returns the real image of the linear estimate together with the report.
    BPSK is solved in the real domain (widely linear), where the regularizer
    per real dimension is ``(sigma^2 / 2) / E_s``.
    """
    if c.is_real:
        rs = complex_to_real(cs, c)
        A = rs.H.T @ rs.H + (cs.noise_var / 2.0 / c.avg_energy) * np.eye(cs.n_tx)
        b = rs.H.T @ rs.y
        x_m = np.linalg.solve(A, b)
        resid = np.linalg.norm(A @ x_m - b)
    else:
        Hh = cs.H.conj().T
        A = Hh @ cs.H + (cs.noise_var / c.avg_energy) * np.eye(cs.n_tx)
        b = Hh @ cs.y
        xc = np.linalg.solve(A, b)
        resid = np.linalg.norm(A @ xc - b)
        x_m = symbols_to_real(xc, c)
    if not np.isfinite(resid) or resid > 1e-8 * max(1.0, np.linalg.norm(b)):
        raise NumericalFailure(f"MMSE solve residual {resid:.3e}")
    symbols = round_to_constellation(x_m, c)
    return x_m, DetectionReport(symbols, x_m, objective(cs, symbols), Detector.MMSE)


def ml_oracle(cs: ComplexSystem, c: Constellation, chunk: int = 1 << 16) -> DetectionReport:
    """Exhaustive maximum-likelihood search over all ``M**N_t`` candidates.

    Candidates are enumerated in lexicographic order of the sorted point list
    (user 0 most significant), and the first minimizer wins. Refuses problems
    above 24 bits rather than approximating.
    """
    n_bits = cs.n_tx * c.bits_per_symbol
    if n_bits > ORACLE_MAX_BITS:
        raise ValueError(f"oracle budget exceeded: {n_bits} bits > {ORACLE_MAX_BITS}")
    pts = c.points
    M, n = pts.size, cs.n_tx
    radix = M ** np.arange(n - 1, -1, -1)
    total = M**n
    best_obj, best_idx = np.inf, -1
    for start in range(0, total, chunk):
        k = np.arange(start, min(start + chunk, total))
        digits = (k[:, None] // radix) % M
        cand = pts[digits]
        r = cs.y[None, :] - cand @ cs.H.T
        obj = np.einsum("ij,ij->i", r.real, r.real) + np.einsum("ij,ij->i", r.imag, r.imag)
        i = int(np.argmin(obj))
        if obj[i] < best_obj:
            best_obj, best_idx = float(obj[i]), int(k[i])
    digits = (best_idx // radix) % M
    symbols = pts[digits]
    return DetectionReport(symbols, symbols_to_real(symbols, c), objective(cs, symbols), Detector.ORACLE)
