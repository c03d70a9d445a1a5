"""Ising formulations of ML detection.

Two mappings of the real-valued least-squares problem ``min ||r - H T s||^2``
onto spins ``s ∈ {-1, 1}^n`` are provided:

* the Delta-Ising problem, which searches for an even-integer correction
  ``d = T s`` around a polynomial-time guess ``x_m`` (``r = y - H x_m``);
* the direct mapping, which encodes each PAM coordinate itself as a weighted
  spin sum (``r = y``).

Both share the same algebra. With ``Q = T' H' H T``::

    ||r - H T s||^2 = -h's - s'Js + offset
    J = -zeroDiag(Q),  h = 2 r' H T,  offset = ||r||^2 + trace(Q)

The energy convention is ``E(s) = -h's - s'Js`` with J symmetric, so every
off-diagonal pair is counted twice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detectors import round_to_constellation
from .mimo import Constellation, RealSystem


@dataclass(frozen=True)
class DeltaSearchSpace:
    """Even-integer correction set ``{-2K, ..., -2, 0, 2, ..., 2K}``.

    The spin weights are binary, ending in a repeated 1: ``(1, 1)`` for
    ``K = 1``, ``(2, 1, 1)`` for ``K = 2``, ``(4, 2, 1, 1)`` for ``K = 4``.
    Only powers of two for K are representable this way.
    """

    levels: tuple[int, ...]
    weights: tuple[int, ...]

    @property
    def spins_per_coord(self) -> int:
        return len(self.weights)

    @classmethod
    def from_radius(cls, radius: int) -> "DeltaSearchSpace":
        """Space whose largest correction is ``radius`` (2, 4, 8, ...)."""
        if radius < 2 or radius % 2 or (radius & (radius - 1)):
            raise ValueError(f"search radius must be a power of two >= 2, got {radius}")
        m = int(np.log2(radius))
        weights = tuple(2**j for j in range(m - 1, -1, -1)) + (1,)
        return cls(tuple(range(-radius, radius + 1, 2)), weights)

    @classmethod
    def from_levels(cls, levels) -> "DeltaSearchSpace":
        levels = sorted(int(v) for v in levels)
        space = cls.from_radius(levels[-1])
        if tuple(levels) != space.levels:
            raise ValueError(f"unsupported search space {levels}")
        return space


DELTA_2 = DeltaSearchSpace.from_radius(2)
DELTA_4 = DeltaSearchSpace.from_radius(4)


@dataclass(frozen=True)
class IsingProblem:
    """``E(s) = -h's - s'Js``; ``E(s) + offset`` equals the quadratic objective."""

    J: np.ndarray
    h: np.ndarray
    offset: float = 0.0

    @property
    def n(self) -> int:
        return self.h.size


@dataclass(frozen=True)
class AugmentedIsing:
    """Purely quadratic problem with the auxiliary spin stored last."""

    J: np.ndarray
    offset: float = 0.0

    @property
    def n(self) -> int:
        return self.J.shape[0]

    @property
    def h(self) -> np.ndarray:
        return np.zeros(self.n)


def _weighted_identity(weights, n_coords: int) -> np.ndarray:
    eye = np.eye(n_coords)
    return np.hstack([w * eye for w in weights])


def build_transform(space: DeltaSearchSpace, n_users: int) -> np.ndarray:
    """``T = [w_1 I, w_2 I, ...]`` of shape ``(2N_t, 2N_t * spins_per_coord)``."""
    return _weighted_identity(space.weights, 2 * n_users)


def pam_transform(c: Constellation, n_coords: int) -> np.ndarray:
    """Spin transform of the direct mapping: ``level = sum_j 2^(k-1-j) s_j``."""
    k = c.bits_per_axis
    return _weighted_identity([2 ** (k - 1 - j) for j in range(k)], n_coords)


def quadratic_to_ising(H: np.ndarray, r: np.ndarray, T: np.ndarray) -> IsingProblem:
    """Ising form of ``||r - H T s||^2``."""
    HT = H @ T
    Q = HT.T @ HT
    J = -Q
    np.fill_diagonal(J, 0.0)
    h = 2.0 * (r @ HT)
    offset = float(r @ r + np.trace(Q))
    return IsingProblem(J, h, offset)


def build_delta_problem(rs: RealSystem, x_m, space: DeltaSearchSpace) -> IsingProblem:
    """Delta-Ising problem for corrections ``d = T s`` around the guess ``x_m``."""
    x_m = np.asarray(x_m, dtype=float)
    if x_m.shape != (rs.H.shape[1],):
        raise ValueError(f"guess has shape {x_m.shape}, expected ({rs.H.shape[1]},)")
    T = _weighted_identity(space.weights, rs.H.shape[1])
    return quadratic_to_ising(rs.H, rs.y - rs.H @ x_m, T)


def build_direct_problem(rs: RealSystem, c: Constellation) -> IsingProblem:
    """Direct mapping: each PAM coordinate is a binary-weighted spin sum."""
    T = pam_transform(c, rs.H.shape[1])
    return quadratic_to_ising(rs.H, rs.y, T)


def augment_linear(p: IsingProblem) -> AugmentedIsing:
    """Fold the field into couplings to an auxiliary spin ``s_a``.

    ``-(h's) s_a - s'Js`` is the energy of the bordered matrix with ``h/2``
    in the last row and column.
    """
    n = p.n
    J = np.zeros((n + 1, n + 1))
    J[:n, :n] = p.J
    J[:n, n] = J[n, :n] = p.h / 2.0
    return AugmentedIsing(J, p.offset)


def recover_spins(s_bar, s_a) -> np.ndarray:
    """Undo the global sign ambiguity of the augmented problem."""
    return np.asarray(s_bar) * s_a


def ising_energy(p: IsingProblem | AugmentedIsing, s) -> float | np.ndarray:
    """``-h's - s'Js``; ``s`` may be a single vector or a stack of row vectors."""
    s = np.asarray(s, dtype=float)
    quad = np.einsum("...i,ij,...j->...", s, p.J, s)
    return -(s @ p.h) - quad


def spins_to_solution(s, T: np.ndarray, x_m, c: Constellation) -> np.ndarray:
    """Decode ``x_m + T s`` to constellation symbols (rounded and clamped)."""
    x = np.asarray(x_m, dtype=float) + T @ np.asarray(s, dtype=float)
    return round_to_constellation(x, c)
