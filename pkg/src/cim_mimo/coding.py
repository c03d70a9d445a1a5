"""Terminated K=7 convolutional codes with hard-decision Viterbi decoding.

Rate 1/3 uses generators (133, 171, 165) octal, rate 1/2 uses (133, 171),
and rate 2/3 punctures the rate-1/2 stream with the pattern ``[1 1; 1 0]``
(keep A0 B0 A1, drop B1). Six zero tail bits return the encoder to state 0.

Coded streams are serialized per time step, ``[A0, B0, (C0,) A1, B1, ...]``.
Both encoder and decoder accept a single block or a 2-D batch of blocks.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

K = 7
MEMORY = K - 1
N_STATES = 1 << MEMORY

GENERATORS = {
    Fraction(1, 3): (0o133, 0o171, 0o165),
    Fraction(1, 2): (0o133, 0o171),
    Fraction(2, 3): (0o133, 0o171),
}
# rows: generator output, columns: time step within the period
PUNCTURE = {
    Fraction(2, 3): np.array([[1, 1], [1, 0]], dtype=bool),
}
RATES = tuple(GENERATORS)


def parse_rate(rate) -> Fraction:
    r = Fraction(rate) if isinstance(rate, (str, Fraction)) else Fraction(rate).limit_denominator(10)
    if r not in GENERATORS:
        raise ValueError(f"unsupported code rate {rate}; expected one of 1/3, 1/2, 2/3")
    return r


def _taps(g: int) -> np.ndarray:
    """Tap vector, index j multiplies the input delayed by j steps."""
    return np.array([(g >> (MEMORY - j)) & 1 for j in range(K)], dtype=np.uint8)


def _keep_mask(rate: Fraction, n_steps: int) -> np.ndarray:
    """Boolean mask over the serialized mother-code stream."""
    n_out = len(GENERATORS[rate])
    if rate not in PUNCTURE:
        return np.ones(n_steps * n_out, dtype=bool)
    pat = PUNCTURE[rate]
    reps = -(-n_steps // pat.shape[1])
    return np.tile(pat, (1, reps))[:, :n_steps].T.ravel()


def coded_length(block_len: int, rate) -> int:
    rate = parse_rate(rate)
    return int(_keep_mask(rate, block_len + MEMORY).sum())


def conv_encode(bits, rate) -> np.ndarray:
    """Encode ``bits`` (shape ``(L,)`` or ``(B, L)``) and append the tail."""
    rate = parse_rate(rate)
    u = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    B, L = u.shape
    T = L + MEMORY
    # u_pad[:, MEMORY + t] = u_t; zeros before the block and after it (tail)
    u_pad = np.zeros((B, MEMORY + T), dtype=np.uint8)
    u_pad[:, MEMORY:MEMORY + L] = u
    gens = GENERATORS[rate]
    out = np.zeros((B, T, len(gens)), dtype=np.uint8)
    for gi, g in enumerate(gens):
        for j, tap in enumerate(_taps(g)):
            if tap:
                out[:, :, gi] ^= u_pad[:, MEMORY - j:MEMORY - j + T]
    coded = out.reshape(B, -1)[:, _keep_mask(rate, T)]
    return coded[0] if np.ndim(bits) == 1 else coded


def _trellis(gens):
    """For each next state and predecessor-LSB ``b``: previous state and expected outputs."""
    nxt = np.arange(N_STATES)
    reg = (nxt[:, None] << 1) | np.arange(2)[None, :]  # 7-bit register, MSB = newest input
    prev = reg & (N_STATES - 1)
    outs = np.stack([np.bitwise_count(reg & g) & 1 for g in gens], axis=-1)
    return prev, outs.astype(np.int8)


def viterbi_decode(coded, rate, block_len: int) -> np.ndarray:
    """Hard-decision ML decoding of a terminated block.

    ``coded`` holds received hard bits (0/1) as produced by :func:`conv_encode`;
    punctured positions are re-inserted as erasures and cost nothing.
    Entries equal to -1 are also treated as erasures.
    """
    rate = parse_rate(rate)
    gens = GENERATORS[rate]
    n_out = len(gens)
    rx = np.atleast_2d(np.asarray(coded, dtype=np.int8))
    B = rx.shape[0]
    T = block_len + MEMORY
    mask = _keep_mask(rate, T)
    if rx.shape[1] != mask.sum():
        raise ValueError(f"expected {mask.sum()} coded bits, got {rx.shape[1]}")
    full = np.full((B, T * n_out), -1, dtype=np.int8)
    full[:, mask] = rx
    full = full.reshape(B, T, n_out)

    prev, outs = _trellis(gens)
    # branch metric for every received symbol pattern, erasure coded as 2
    patterns = np.array(np.meshgrid(*[[0, 1, 2]] * n_out, indexing="ij")).reshape(n_out, -1).T
    table = ((patterns[:, None, None, :] != outs[None]) & (patterns[:, None, None, :] < 2)).sum(-1)
    table = table.astype(np.int32)
    sym = np.where(full < 0, 2, full).astype(np.int64) @ (3 ** np.arange(n_out - 1, -1, -1))

    big = np.iinfo(np.int32).max // 4
    pm = np.full((B, N_STATES), big, dtype=np.int32)
    pm[:, 0] = 0
    decisions = np.empty((T, B, N_STATES), dtype=np.uint8)
    for t in range(T):
        cand = pm[:, prev] + table[sym[:, t]]  # (B, S, 2)
        decisions[t] = cand[:, :, 1] < cand[:, :, 0]
        pm = np.minimum(cand[:, :, 0], cand[:, :, 1], out=pm)
        np.minimum(pm, big, out=pm)

    state = np.zeros(B, dtype=np.int64)
    u = np.empty((B, T), dtype=np.uint8)
    for t in range(T - 1, -1, -1):
        u[:, t] = state >> (MEMORY - 1)
        b = decisions[t, np.arange(B), state]
        state = ((state << 1) | b) & (N_STATES - 1)
    info = u[:, :block_len]
    return info[0] if np.ndim(coded) == 1 else info
