"""Piecewise-constant propagation by exact exponentiation of each step's Hamiltonian.

Convention: on interval j the amplitude is the left-edge sample f(t_j) and the
rotating phases are frozen at the interval midpoint (j + 1/2) dt.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ._kernels import band_eigensystems, propagate_columns
from .system import DOWN, PulseSet, SystemParams, basis_index, bands_to_blocks, coupling_bands


class PropagationError(RuntimeError):
    """Eigensolver failure while exponentiating a step Hamiltonian."""

    def __init__(self, step: int, reason: str):
        super().__init__(f"step {step}: {reason}")
        self.step = step


def _locate_failure(mats: np.ndarray, reason: str) -> PropagationError:
    for k in range(mats.shape[0]):
        if not np.all(np.isfinite(mats[k])):
            return PropagationError(k, f"non-finite Hamiltonian entries ({reason})")
        try:
            np.linalg.eigh(mats[k])
        except np.linalg.LinAlgError as exc:
            return PropagationError(k, str(exc))
    return PropagationError(-1, reason)


def _eigh(mats: np.ndarray):
    try:
        w, v = np.linalg.eigh(mats)
    except np.linalg.LinAlgError as exc:
        raise _locate_failure(mats, str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise _locate_failure(mats, "eigensolver returned non-finite eigenvalues")
    return w, v


def step_propagator(h: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i H dt) = V diag(exp(-i lambda dt)) V^dagger.

    Accepts a single Hermitian matrix or a stack of shape (S, d, d); on failure the
    raised :class:`PropagationError` carries the index of the offending step.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    h = np.asarray(h, dtype=complex)
    single = h.ndim == 2
    stack = h[None] if single else h
    w, v = _eigh(stack)
    u = (v * np.exp(-1j * w * dt)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    return u[0] if single else u


def block_step_propagators(b: np.ndarray, dt: float):
    """Step unitaries for H = |up><down| (x) B + h.c. from the eigensystem of B^dagger B.

    Such an H squares to diag(B^dagger B, B B^dagger), so with B^dagger B = W diag(s^2) W^dagger
        U_dd = cos(sqrt(X) dt),             U_ud = -i B sin(sqrt(X) dt)/sqrt(X),
        U_du = -i sin(sqrt(X) dt)/sqrt(X) B^dagger,
        U_uu = 1 + B (cos(sqrt(X) dt) - 1)/X B^dagger,
    with X = B^dagger B. Only a (n_max+1)-dimensional eigenproblem is solved per step.

    Returns the four (S, d, d) blocks (U_dd, U_du, U_ud, U_uu); U_du maps spin up to spin down.
    """
    b = np.asarray(b, dtype=complex)
    bh = np.conj(np.swapaxes(b, -1, -2))
    lam, w = _eigh(bh @ b)
    s = np.sqrt(np.clip(lam, 0.0, None))
    cos_s = np.cos(s * dt)
    sinc_s = dt * np.sinc(s * dt / np.pi)
    half = np.sinc(s * dt / (2.0 * np.pi))
    vers = -0.5 * dt * dt * half * half
    wh = np.conj(np.swapaxes(w, -1, -2))
    u_dd = (w * cos_s[..., None, :]) @ wh
    sx = (w * sinc_s[..., None, :]) @ wh
    u_ud = -1j * (b @ sx)
    u_du = -1j * (sx @ bh)
    d = b.shape[-1]
    u_uu = np.eye(d) + b @ ((w * vers[..., None, :]) @ wh) @ bh
    return u_dd, u_du, u_ud, u_uu


def embed_unitaries(blocks) -> np.ndarray:
    """Assemble full flat-basis unitaries from the four spin blocks."""
    u_dd, u_du, u_ud, u_uu = blocks
    d = u_dd.shape[-1]
    u = np.empty(u_dd.shape[:-2] + (2 * d, 2 * d), dtype=complex)
    u[..., 0::2, 0::2] = u_dd
    u[..., 0::2, 1::2] = u_du
    u[..., 1::2, 0::2] = u_ud
    u[..., 1::2, 1::2] = u_uu
    return u


def step_bands(params: SystemParams, pulses: PulseSet):
    """Tridiagonal coupling (diag, sub, sup) of every interval; see :func:`coupling_bands`."""
    if pulses.n_steps != params.n_steps:
        raise ValueError(
            f"pulse grid has {pulses.n_steps} intervals, params expect {params.n_steps}"
        )
    t_mid = (np.arange(params.n_steps) + 0.5) * params.dt
    return coupling_bands(params, pulses.samples[:, :-1].T, t_mid)


def step_hamiltonian_blocks(params: SystemParams, pulses: PulseSet) -> np.ndarray:
    """Down-to-up coupling block of every interval, shape (n_steps, n_max+1, n_max+1)."""
    return bands_to_blocks(*step_bands(params, pulses))


def step_unitaries(params: SystemParams, pulses: PulseSet) -> np.ndarray:
    """Full step unitaries U_j, shape (n_steps, dim, dim)."""
    b = step_hamiltonian_blocks(params, pulses)
    return embed_unitaries(block_step_propagators(b, params.dt))


def apply_sequence(unitaries: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Apply U_{S-1} ... U_1 U_0 to a state vector or to the columns of a matrix."""
    out = np.array(states, dtype=complex)
    for u in unitaries:
        out = u @ out
    return out


def total_unitary(params: SystemParams, pulses: PulseSet) -> np.ndarray:
    """U(T) = U_{n_steps-1} ... U_0 in the flat basis."""
    return apply_sequence(step_unitaries(params, pulses), np.eye(params.dim, dtype=complex))


def evolve(params: SystemParams, pulses: PulseSet, initial: np.ndarray) -> np.ndarray:
    """Evolve a state vector from t = 0 to t = T."""
    initial = np.asarray(initial, dtype=complex)
    if initial.shape != (params.dim,):
        raise ValueError(f"state must have length {params.dim}, got {initial.shape}")
    return apply_sequence(step_unitaries(params, pulses), initial)


def evolve_trajectory(params: SystemParams, pulses: PulseSet, initial: np.ndarray) -> np.ndarray:
    """States at every grid time t_0..t_{n_steps}, shape (n_steps+1, dim).

    ``initial`` may also be a (dim, k) matrix of columns; the result is then (n_steps+1, dim, k).
    """
    initial = np.asarray(initial, dtype=complex)
    if initial.shape[0] != params.dim or initial.ndim > 2:
        raise ValueError(f"initial states must have leading dimension {params.dim}, got {initial.shape}")
    us = step_unitaries(params, pulses)
    out = np.empty((params.n_steps + 1,) + initial.shape, dtype=complex)
    out[0] = initial
    for j, u in enumerate(us):
        out[j + 1] = u @ out[j]
    return out


def reverse_sequence(unitaries: np.ndarray) -> np.ndarray:
    """Step sequence of the time-reversed evolution: U_j^dagger applied last-to-first."""
    return np.conj(np.swapaxes(unitaries[::-1], -1, -2))


@dataclass
class EvolvedBasis:
    """Final states |psi_n(T)> = U(T)|down, n>, n = 0..N-1, stored as matrix columns."""

    finals: np.ndarray
    params: SystemParams
    pulse_hash: str = field(default="")

    @property
    def n_states(self) -> int:
        return self.finals.shape[1]

    def state(self, n: int) -> np.ndarray:
        return self.finals[:, n]


def pulse_digest(pulses: PulseSet) -> str:
    return hashlib.sha256(np.ascontiguousarray(pulses.samples).tobytes()).hexdigest()[:16]


def evolve_basis(params: SystemParams, pulses: PulseSet, n_states: int) -> EvolvedBasis:
    """Evolve |down, n>, n < n_states, under one shared step-unitary sequence."""
    if not 1 <= n_states <= params.n_levels:
        raise ValueError(f"N = {n_states} must lie in 1..{params.n_levels}")
    diag, sub, sup = step_bands(params, pulses)
    if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(sub)) and np.all(np.isfinite(sup))):
        bad = ~np.isfinite(diag).all(axis=1) | ~np.isfinite(sub).all(axis=1) | ~np.isfinite(sup).all(axis=1)
        raise PropagationError(int(np.argmax(bad)), "non-finite Hamiltonian entries")
    lam, w, failed = band_eigensystems(diag, sub, sup)
    if failed >= 0:
        raise PropagationError(int(failed), "band eigensolver did not converge")
    d = params.n_levels
    down = np.zeros((d, n_states), dtype=complex)
    down[np.arange(n_states), np.arange(n_states)] = 1.0
    up = np.zeros_like(down)
    propagate_columns(diag, sub, sup, lam, w, params.dt, down, up)
    finals = np.empty((params.dim, n_states), dtype=complex)
    finals[0::2] = down
    finals[1::2] = up
    return EvolvedBasis(finals, params, pulse_digest(pulses))


def initial_basis(params: SystemParams, n_states: int) -> np.ndarray:
    cols = np.zeros((params.dim, n_states), dtype=complex)
    for n in range(n_states):
        cols[basis_index(DOWN, n), n] = 1.0
    return cols
