"""Amplitude-heterogeneity-corrected CIM, integrated with explicit Euler.

Per spin ``i`` the model is::

    dx_i/dt = (1 - p) x_i - x_i^3 + eps(t) e_i sum_j J_ij x_j
    de_i/dt = -beta (x_i^2 - a) e_i,        e_i > 0
    eps(t)  = gamma t

Each step evaluates the right-hand side at the old state and ``eps`` at the
step's start time. ``e`` is floored at ``E_FLOOR`` after every step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .ising import AugmentedIsing

E_FLOOR = 1e-12


@dataclass(frozen=True)
class CimParams:
    p: float = 0.98
    beta: float = 1.0
    a: float = 2.0
    gamma: float = 1000.0 / (256 * 0.01)
    dt: float = 0.01
    steps: int = 256
    init_sigma: float = float(np.sqrt(0.001))

    def __post_init__(self):
        if not (self.dt > 0 and self.steps >= 1 and self.beta > 0 and self.a > 0 and self.init_sigma > 0):
            raise ValueError(f"invalid CIM parameters: {self}")


def default_params() -> CimParams:
    return CimParams()


def epsilon_at(t: float, params: CimParams) -> float:
    """Linear feedback ramp ``gamma * t``."""
    return params.gamma * t


@dataclass
class AnnealResult:
    """Final state of one anneal.

    ``trace`` and ``e_trace`` hold ``steps + 1`` rows (initial state first)
    when requested. ``failed`` marks anneals whose state became non-finite.
    """

    spins: np.ndarray
    final_x: np.ndarray
    final_e: np.ndarray
    failed: bool = False
    floor_hits: int = 0
    trace: np.ndarray | None = None
    e_trace: np.ndarray | None = None


def spin_signs(x: np.ndarray) -> np.ndarray:
    """``sign`` with ``sign(0) = +1``."""
    return np.where(x < 0, -1, 1).astype(np.int8)


def initial_state(n: int, params: CimParams, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """x ~ N(0, sigma^2), e ~ |N(0, sigma^2)|, drawn as one ``(2, n)`` block."""
    z = rng.standard_normal((2, n)) * params.init_sigma
    return z[0], np.abs(z[1])


def batch_rng(master_seed) -> np.random.Generator:
    """Generator feeding the initial states of a batch keyed on ``master_seed``."""
    return np.random.default_rng(np.random.SeedSequence(master_seed))


@numba.njit(cache=True, nogil=True)
def _euler(J, x, e, r, dt, beta, a, gamma, steps, xs, es):
    """In-place Euler recursion for one coupling matrix and a stack of states.

    ``xs``/``es`` receive the per-step states when they have ``steps + 1``
    rows; pass zero-row arrays to skip tracing.
    """
    n_rows, n = x.shape
    hits = np.zeros(n_rows, np.int64)
    trace = xs.shape[0] > 0
    if trace:
        xs[0] = x
        es[0] = e
    for k in range(steps):
        eps = gamma * (k * dt)
        field = np.dot(x, J)
        for i in range(n_rows):
            for j in range(n):
                xi = x[i, j]
                x2 = xi * xi
                ei = e[i, j]
                x[i, j] = xi + dt * ((r - x2) * xi + eps * ei * field[i, j])
                ei = ei * (1.0 - dt * beta * (x2 - a))
                if ei < E_FLOOR:
                    ei = E_FLOOR
                    hits[i] += 1
                e[i, j] = ei
        if trace:
            xs[k + 1] = x
            es[k + 1] = e
    return hits


def integrate(J: np.ndarray, x0: np.ndarray, e0: np.ndarray, params: CimParams, capture_trace: bool = False):
    """Run the Euler recursion on a stack of states.

    ``x0`` and ``e0`` have shape ``(N_a, n)`` for a single ``(n, n)`` coupling
    matrix, or ``(B, N_a, n)`` for a stack of ``B`` matrices. Returns
    ``(x, e, floor_hits, x_trace, e_trace)``; the traces have a leading axis
    of ``steps + 1`` and are None unless requested. ``floor_hits`` counts
    clamped ``e`` entries per state row.
    """
    J = np.ascontiguousarray(J, dtype=float)
    x = np.array(x0, dtype=float, order="C")
    e = np.array(e0, dtype=float, order="C")
    if x.shape != e.shape:
        raise ValueError("x0 and e0 must have the same shape")
    stacked = J.ndim == 3
    if not stacked:
        J, x, e = J[None], x[None], e[None]
    if x.ndim != 3 or J.shape[0] != x.shape[0] or J.shape[1:] != (x.shape[2],) * 2:
        raise ValueError(f"incompatible shapes J{J.shape}, x{x.shape}")
    n_rows = params.steps + 1 if capture_trace else 0
    xs = np.empty((x.shape[0], n_rows) + x.shape[1:])
    es = np.empty_like(xs)
    hits = np.empty(x.shape[:2], dtype=np.int64)
    for b in range(x.shape[0]):
        hits[b] = _euler(J[b], x[b], e[b], 1.0 - params.p, params.dt, params.beta, params.a,
                         params.gamma, params.steps, xs[b], es[b])
    if not capture_trace:
        xs = es = None
    elif stacked:
        xs, es = np.moveaxis(xs, 1, 0), np.moveaxis(es, 1, 0)
    else:
        xs, es = xs[0], es[0]
    if not stacked:
        x, e, hits = x[0], e[0], hits[0]
    return x, e, hits, xs, es


def _result(x, e, hits, xs=None, es=None) -> AnnealResult:
    failed = not (np.all(np.isfinite(x)) and np.all(np.isfinite(e)))
    return AnnealResult(spin_signs(np.nan_to_num(x)), x, e, failed, int(hits), xs, es)


def anneal(
    prob: AugmentedIsing,
    params: CimParams,
    rng: np.random.Generator,
    capture_trace: bool = False,
    x0: np.ndarray | None = None,
    e0: np.ndarray | None = None,
) -> AnnealResult:
    """One anneal from a random (or supplied) initial state."""
    _check_problem(prob)
    if x0 is None or e0 is None:
        rx, re = initial_state(prob.n, params, rng)
        x0 = rx if x0 is None else x0
        e0 = re if e0 is None else e0
    x, e, hits, xs, es = integrate(prob.J, np.asarray(x0)[None], np.asarray(e0)[None], params, capture_trace)
    if capture_trace:
        return _result(x[0], e[0], hits[0], xs[:, 0], es[:, 0])
    return _result(x[0], e[0], hits[0])


def _check_problem(prob: AugmentedIsing):
    J = prob.J
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError("coupling matrix must be square")
    if not np.allclose(J, J.T, rtol=0, atol=1e-12 * max(1.0, np.abs(J).max())) or np.any(np.diag(J) != 0):
        raise ValueError("coupling matrix must be symmetric with zero diagonal")


def batch_initial_states(n: int, n_anneals: int, params: CimParams, master_seed) -> tuple[np.ndarray, np.ndarray]:
    """Initial states of anneals ``0 .. n_anneals-1``.

    Anneal ``k`` takes the ``k``-th ``(2, n)`` block of one standard-normal
    stream, so its start depends only on ``(master_seed, k)`` and batches
    of different sizes agree on their common prefix.
    """
    z = batch_rng(master_seed).standard_normal((n_anneals, 2, n)) * params.init_sigma
    return z[:, 0], np.abs(z[:, 1])


def run_batch(prob: AugmentedIsing, n_anneals: int, params: CimParams, master_seed) -> list[AnnealResult]:
    """``n_anneals`` independent anneals, integrated together as one stack.

    Anneal ``k`` starts from block ``k`` of :func:`batch_initial_states`;
    results are ordered by ``k``. ``run_batch(prob, 1, params, seed)`` is the
    same as ``anneal(prob, params, batch_rng(seed))``.
    """
    if n_anneals < 1:
        raise ValueError("need at least one anneal")
    _check_problem(prob)
    x0, e0 = batch_initial_states(prob.n, n_anneals, params, master_seed)
    x, e, hits, _, _ = integrate(prob.J, x0, e0, params)
    return [_result(x[k], e[k], hits[k]) for k in range(n_anneals)]
