"""Filter sequence for the work distribution of a process acting on the motion.

The sequence is map U_m, shelve spin down, undo the map, apply the process,
map U_m', shelve spin down, read out what is left. Shelving is an ideal
incoherent transfer into a classical register that never re-enters the dynamics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .propagator import total_unitary
from .system import PulseSet, SystemParams

SPIN_DOWN = np.diag([1.0, 0.0])
SPIN_UP = np.diag([0.0, 1.0])


def _dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(a.T)


@dataclass
class DensityMatrix:
    """In-trap spin x Fock density matrix plus two shelved populations."""

    rho: np.ndarray
    shelf_a1: float = 0.0
    shelf_a2: float = 0.0

    @property
    def in_trap(self) -> float:
        return float(np.real(np.trace(self.rho)))

    @property
    def total(self) -> float:
        return self.in_trap + self.shelf_a1 + self.shelf_a2

    def check(self, atol: float = 1e-10) -> None:
        if abs(self.total - 1.0) > atol:
            raise ValueError(f"probability not conserved: total = {self.total:.12g}")
        if np.max(np.abs(self.rho - _dagger(self.rho))) > atol:
            raise ValueError("rho is not Hermitian")
        if np.min(np.linalg.eigvalsh(0.5 * (self.rho + _dagger(self.rho)))) < -1e-12 - atol:
            raise ValueError("rho has negative eigenvalues")


@dataclass
class PhononChannel:
    """Quantum process on the Fock factor given by Kraus operators."""

    kraus: list[np.ndarray]

    def __post_init__(self):
        self.kraus = [np.asarray(k, dtype=complex) for k in self.kraus]
        if not self.kraus:
            raise ValueError("a channel needs at least one Kraus operator")
        d = self.kraus[0].shape[0]
        if any(k.shape != (d, d) for k in self.kraus):
            raise ValueError("Kraus operators must be square and of equal size")
        err = np.max(np.abs(sum(_dagger(k) @ k for k in self.kraus) - np.eye(d)))
        if err > 1e-10:
            raise ValueError(f"Kraus operators are not complete (deviation {err:.3g})")

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    @classmethod
    def identity(cls, d: int) -> "PhononChannel":
        return cls([np.eye(d)])

    def apply(self, rho_ho: np.ndarray) -> np.ndarray:
        return sum(k @ rho_ho @ _dagger(k) for k in self.kraus)

    def apply_motional(self, rho: np.ndarray) -> np.ndarray:
        """Act on the Fock factor of a spin x Fock density matrix."""
        full = [np.kron(k, np.eye(2)) for k in self.kraus]
        return sum(k @ rho @ _dagger(k) for k in full)

    def transfer(self, m: int, m_prime: int) -> float:
        """<m'| L(|m><m|) |m'>."""
        proj = np.zeros((self.dim, self.dim), dtype=complex)
        proj[m, m] = 1.0
        return float(np.real(self.apply(proj)[m_prime, m_prime]))

    def to_json(self) -> str:
        mats = [[[[float(z.real), float(z.imag)] for z in row] for row in k] for k in self.kraus]
        return json.dumps(mats)

    @classmethod
    def from_json(cls, text: str) -> "PhononChannel":
        mats = json.loads(text)
        kraus = [np.array([[complex(re, im) for re, im in row] for row in k]) for k in mats]
        return cls(kraus)

    @classmethod
    def load(cls, path) -> "PhononChannel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


UnitaryProvider = Callable[[int], np.ndarray]


def ideal_map(n_levels: int, m: int, motional: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
    """Exact selective map: flips the spin of |down, m> only.

    ``motional`` optionally supplies unitaries (W_down, W_up) that reshuffle the
    Fock state after the flip, conditioned on the final spin; the spin outcome is
    unchanged, so the map is still ideal.
    """
    d = 2 * n_levels
    u = np.eye(d, dtype=complex)
    dn, up = 2 * m, 2 * m + 1
    u[[dn, up], :] = u[[up, dn], :]
    if motional is not None:
        w_down, w_up = motional
        u = (np.kron(w_down, SPIN_DOWN) + np.kron(w_up, SPIN_UP)) @ u
    return u


class IdealMaps:
    """Provider of exact maps; with a generator each m gets a fixed random motional reshuffle."""

    def __init__(self, n_levels: int, rng: np.random.Generator | None = None):
        self.n_levels = n_levels
        self._cache: dict[int, np.ndarray] = {}
        self._rng = rng

    def __call__(self, m: int) -> np.ndarray:
        if m not in self._cache:
            motional = None
            if self._rng is not None:
                motional = (random_unitary(self.n_levels, self._rng), random_unitary(self.n_levels, self._rng))
            self._cache[m] = ideal_map(self.n_levels, m, motional)
        return self._cache[m]


class PropagatedMaps:
    """Provider of U_m(T) obtained by propagating designed pulses."""

    def __init__(self, params: SystemParams, pulses: Mapping[int, PulseSet]):
        self.params = params
        self.pulses = dict(pulses)
        self._cache: dict[int, np.ndarray] = {}

    def __call__(self, m: int) -> np.ndarray:
        if m not in self._cache:
            if m not in self.pulses:
                raise KeyError(f"no pulse supplied for m = {m}")
            self._cache[m] = total_unitary(self.params, self.pulses[m])
        return self._cache[m]


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ _dagger(g)
    return rho / np.trace(rho)


def random_channel(d: int, rng: np.random.Generator, n_kraus: int = 3) -> PhononChannel:
    """Random CPTP map from a Stinespring isometry."""
    z = rng.normal(size=(n_kraus * d, d)) + 1j * rng.normal(size=(n_kraus * d, d))
    q, _ = np.linalg.qr(z)
    return PhononChannel([q[i * d : (i + 1) * d] for i in range(n_kraus)])


def thermal_state(d: int, nbar: float) -> np.ndarray:
    """Thermal Fock distribution truncated to d levels and renormalised."""
    if nbar <= 0:
        p = np.zeros(d)
        p[0] = 1.0
    else:
        q = nbar / (1.0 + nbar)
        p = q ** np.arange(d)
        p /= p.sum()
    return np.diag(p).astype(complex)


@dataclass
class FilterResult:
    P_f: float
    state: DensityMatrix
    steps: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"P_f": self.P_f, "steps": self.steps}


def _shelve(state: DensityMatrix, register: str) -> DensityMatrix:
    proj_down = np.kron(np.eye(state.rho.shape[0] // 2), SPIN_DOWN)
    proj_up = np.eye(state.rho.shape[0]) - proj_down
    moved = float(np.real(np.trace(proj_down @ state.rho)))
    kept = proj_up @ state.rho @ proj_up
    a1, a2 = state.shelf_a1, state.shelf_a2
    if register == "a1":
        a1 += moved
    else:
        a2 += moved
    return DensityMatrix(kept, a1, a2)


def _unitary(state: DensityMatrix, u: np.ndarray) -> DensityMatrix:
    return DensityMatrix(u @ state.rho @ _dagger(u), state.shelf_a1, state.shelf_a2)


def _validate_inputs(rho_ho: np.ndarray, maps: UnitaryProvider, m: int) -> np.ndarray:
    rho_ho = np.asarray(rho_ho, dtype=complex)
    d = rho_ho.shape[0]
    if rho_ho.shape != (d, d):
        raise ValueError("rho_ho must be a square matrix")
    if abs(np.trace(rho_ho) - 1.0) > 1e-10 or np.max(np.abs(rho_ho - _dagger(rho_ho))) > 1e-10:
        raise ValueError("rho_ho must be a Hermitian matrix of unit trace")
    if not 0 <= m < d:
        raise ValueError(f"level {m} outside 0..{d - 1}")
    u = maps(m)
    if u.shape != (2 * d, 2 * d):
        raise ValueError(f"map has shape {u.shape}, expected {(2 * d, 2 * d)}")
    return rho_ho


def _record(steps: list, label: str, state: DensityMatrix) -> None:
    steps.append(
        {"step": label, "trace": state.in_trap, "shelf_a1": state.shelf_a1, "shelf_a2": state.shelf_a2}
    )


def run_filter_sequence(
    rho_ho: np.ndarray,
    m: int,
    m_prime: int,
    channel: PhononChannel,
    maps: UnitaryProvider,
) -> FilterResult:
    """Fluorescence probability of the full map-shelve-unmap-process-map-shelve sequence."""
    rho_ho = _validate_inputs(rho_ho, maps, m)
    d = rho_ho.shape[0]
    if channel.dim != d:
        raise ValueError(f"channel acts on {channel.dim} levels, state has {d}")
    if not 0 <= m_prime < d:
        raise ValueError(f"level {m_prime} outside 0..{d - 1}")
    steps: list[dict] = []
    state = DensityMatrix(np.kron(rho_ho, SPIN_DOWN))
    _record(steps, "a_prepare", state)
    u_m = maps(m)
    state = _unitary(state, u_m)
    _record(steps, "b_map", state)
    state = _shelve(state, "a1")
    _record(steps, "c_shelve", state)
    state = _unitary(state, _dagger(u_m))
    _record(steps, "d_unmap", state)
    state = DensityMatrix(channel.apply_motional(state.rho), state.shelf_a1, state.shelf_a2)
    _record(steps, "e_process", state)
    state = _unitary(state, maps(m_prime))
    _record(steps, "f_map", state)
    state = _shelve(state, "a2")
    _record(steps, "g_shelve", state)
    _record(steps, "h_readout", state)
    return FilterResult(state.in_trap, state, steps)


def initial_population_measurement(rho_ho: np.ndarray, m: int, maps: UnitaryProvider) -> float:
    """Unshelved population after the first map and shelving step."""
    rho_ho = _validate_inputs(rho_ho, maps, m)
    state = _unitary(DensityMatrix(np.kron(rho_ho, SPIN_DOWN)), maps(m))
    return _shelve(state, "a1").in_trap


def closed_form_probability(rho_ho: np.ndarray, m: int, m_prime: int, channel: PhononChannel) -> float:
    """<m|rho|m> <m'|L(|m><m|)|m'>."""
    return float(np.real(rho_ho[m, m])) * channel.transfer(m, m_prime)


def protocol_error(rho_ho, m: int, m_prime: int, channel: PhononChannel, maps: UnitaryProvider) -> float:
    """|P_f(sequence) - P_f(closed form)| for possibly imperfect maps."""
    seq = run_filter_sequence(rho_ho, m, m_prime, channel, maps).P_f
    return abs(seq - closed_form_probability(rho_ho, m, m_prime, channel))
