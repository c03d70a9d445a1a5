"""M-QAM constellations, Rayleigh channels and the complex/real system transforms.

Constellations are kept on the unnormalized odd-integer grid (levels ±1, ±3,
...), so the Ising coefficients built from them stay on the integer lattice.
Bits are Gray mapped per axis (reflected binary), I bits first then Q bits.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SUPPORTED_ORDERS = (2, 4, 16, 64, 256)


@dataclass(frozen=True)
class Constellation:
    """Square M-QAM (or BPSK) on the odd-integer grid.

    Attributes
    ----------
    order : int
        Number of symbols M.
    pam_levels : np.ndarray
        Sorted per-axis PAM levels, e.g. ``[-3, -1, 1, 3]`` for 16-QAM.
    bits_per_symbol : int
        ``log2(M)``.
    avg_energy : float
        Mean of ``|symbol|**2`` over all M symbols.
    """

    order: int
    pam_levels: np.ndarray = field(repr=False)
    bits_per_symbol: int
    avg_energy: float

    @property
    def is_real(self) -> bool:
        """True for BPSK, which only occupies the I axis."""
        return self.order == 2

    @property
    def bits_per_axis(self) -> int:
        return self.bits_per_symbol if self.is_real else self.bits_per_symbol // 2

    @property
    def max_level(self) -> int:
        return int(self.pam_levels[-1])

    @property
    def points(self) -> np.ndarray:
        """All M symbols, sorted by (real, imag)."""
        if self.is_real:
            return self.pam_levels.astype(complex)
        re, im = np.meshgrid(self.pam_levels, self.pam_levels, indexing="ij")
        return (re + 1j * im).ravel()


def make_constellation(order: int) -> Constellation:
    """Build the Gray-mapped constellation of the given order."""
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported modulation order {order}; expected one of {SUPPORTED_ORDERS}")
    if order == 2:
        levels = np.array([-1, 1])
        return Constellation(2, levels, 1, 1.0)
    side = int(round(np.sqrt(order)))
    levels = np.arange(-(side - 1), side, 2)
    bps = int(np.log2(order))
    # E|a + bi|^2 = 2 * E[a^2] over the uniform PAM grid
    es = 2.0 * float(np.mean(levels.astype(float) ** 2))
    return Constellation(order, levels, bps, es)


def _gray_table(k: int) -> np.ndarray:
    """Row ``i`` holds the k bits (MSB first) of the Gray code of level index i."""
    idx = np.arange(2**k)
    gray = idx ^ (idx >> 1)
    shifts = np.arange(k - 1, -1, -1)
    return ((gray[:, None] >> shifts) & 1).astype(np.uint8)


def _bits_to_levels(bits: np.ndarray, c: Constellation) -> np.ndarray:
    k = c.bits_per_axis
    weights = 1 << np.arange(k - 1, -1, -1)
    gray = bits.reshape(-1, k) @ weights
    # invert the Gray code: idx = g ^ (g >> 1) ^ (g >> 2) ...
    idx = gray.copy()
    shift = gray >> 1
    while np.any(shift):
        idx ^= shift
        shift >>= 1
    return c.pam_levels[idx]


def modulate(bits, c: Constellation) -> np.ndarray:
    """Map a bit vector onto complex symbols.

    Each group of ``bits_per_symbol`` bits becomes one symbol: the first half
    selects the I level, the second half the Q level.
    """
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % c.bits_per_symbol:
        raise ValueError(
            f"bit count {bits.size} is not a multiple of bits_per_symbol={c.bits_per_symbol}"
        )
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    groups = bits.reshape(-1, c.bits_per_symbol)
    if c.is_real:
        return _bits_to_levels(groups, c).astype(complex)
    k = c.bits_per_axis
    re = _bits_to_levels(groups[:, :k], c)
    im = _bits_to_levels(groups[:, k:], c)
    return re + 1j * im


def _levels_to_bits(levels: np.ndarray, c: Constellation) -> np.ndarray:
    idx_f = (levels + c.max_level) / 2.0
    idx = np.rint(idx_f).astype(np.int64)
    if np.any(np.abs(idx_f - idx) > 1e-9) or np.any(idx < 0) or np.any(idx >= c.pam_levels.size):
        raise ValueError("symbol is not a constellation point; round before demodulating")
    return _gray_table(c.bits_per_axis)[idx]


def demodulate(symbols, c: Constellation) -> np.ndarray:
    """Exact inverse of :func:`modulate`; rejects off-constellation symbols."""
    symbols = np.asarray(symbols, dtype=complex).ravel()
    if c.is_real:
        if np.any(np.abs(symbols.imag) > 1e-9):
            raise ValueError("BPSK symbol with nonzero imaginary part")
        return _levels_to_bits(symbols.real, c).ravel()
    bits_i = _levels_to_bits(symbols.real, c)
    bits_q = _levels_to_bits(symbols.imag, c)
    return np.concatenate([bits_i, bits_q], axis=1).ravel()


@dataclass(frozen=True)
class ComplexSystem:
    """Received vector ``y = H x + n`` with per-entry noise variance."""

    H: np.ndarray
    y: np.ndarray
    noise_var: float

    def __post_init__(self):
        if self.H.ndim != 2 or self.y.shape != (self.H.shape[0],):
            raise ValueError(f"inconsistent shapes H{self.H.shape}, y{self.y.shape}")
        if not self.noise_var >= 0:
            raise ValueError("noise variance must be non-negative")

    @property
    def n_tx(self) -> int:
        return self.H.shape[1]

    @property
    def n_rx(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class RealSystem:
    H: np.ndarray
    y: np.ndarray


def complex_to_real(cs: ComplexSystem, c: Constellation | None = None) -> RealSystem:
    """Real-valued equivalent ``[[Re H, -Im H], [Im H, Re H]]``, ``[Re y; Im y]``.

    For BPSK (pass ``c``) the Q columns are dropped, since those coordinates
    are known to be zero.
    """
    Hr, Hi = cs.H.real, cs.H.imag
    H = np.block([[Hr, -Hi], [Hi, Hr]])
    y = np.concatenate([cs.y.real, cs.y.imag])
    if c is not None and c.is_real:
        H = H[:, : cs.n_tx]
    return RealSystem(H, y)


def complex_to_real_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    return np.concatenate([x.real, x.imag])


def real_to_complex_symbols(x) -> np.ndarray:
    """Invert the ``[Re x; Im x]`` stacking."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size % 2:
        raise ValueError(f"real vector length {x.size} is odd")
    n = x.size // 2
    return x[:n] + 1j * x[n:]


def real_to_symbols(x, c: Constellation) -> np.ndarray:
    """Like :func:`real_to_complex_symbols` but aware of BPSK's I-only layout."""
    if c.is_real:
        return np.asarray(x, dtype=float).astype(complex)
    return real_to_complex_symbols(x)


def symbols_to_real(x, c: Constellation) -> np.ndarray:
    if c.is_real:
        return np.asarray(x).real.astype(float)
    return complex_to_real_vector(x)


def sample_channel(n_tx: int, n_rx: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, 1) Rayleigh channel of shape ``(n_rx, n_tx)``."""
    if n_tx < 1 or n_rx < 1:
        raise ValueError("antenna counts must be positive")
    g = rng.standard_normal((2, n_rx, n_tx))
    return (g[0] + 1j * g[1]) * np.sqrt(0.5)


def noise_variance(snr_db: float, n_tx: int, c: Constellation) -> float:
    """sigma^2 = N_t * E_s / SNR: average SNR per receive antenna, unit-variance channel."""
    return float(n_tx * c.avg_energy / 10.0 ** (snr_db / 10.0))


def transmit(H, x, snr_db: float, c: Constellation, rng: np.random.Generator) -> ComplexSystem:
    H = np.asarray(H, dtype=complex)
    x = np.asarray(x, dtype=complex)
    sigma2 = noise_variance(snr_db, H.shape[1], c)
    g = rng.standard_normal((2, H.shape[0]))
    n = (g[0] + 1j * g[1]) * np.sqrt(sigma2 / 2.0)
    return ComplexSystem(H, H @ x + n, sigma2)
