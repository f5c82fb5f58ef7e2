"""Spin x Fock Hilbert space, Lamb-Dicke couplings and the three-field Hamiltonian.

Units: times in microseconds, angular frequencies in rad/us, hbar = 1.
Basis states |spin, n> are stored at flat index ``2*n + spin`` with
spin down = 0 and spin up = 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

FIELDS = ("carrier", "blue", "red")
CARRIER, BLUE, RED = 0, 1, 2
DOWN, UP = 0, 1

# (field, delta_n, phase multiplier k): coupling |down, n> -> |up, n + delta_n>
# carries the rotating factor exp(i * k * omega_z * t).
COUPLING_TERMS = (
    (CARRIER, -1, +1),
    (CARRIER, 0, 0),
    (CARRIER, +1, -1),
    (BLUE, 0, +1),
    (BLUE, +1, 0),
    (RED, -1, 0),
    (RED, 0, -1),
)


def khz_to_angular(f_khz: float) -> float:
    """Convert a frequency in kHz to an angular frequency in rad/us."""
    return 2.0 * math.pi * f_khz * 1e-3


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the driven ion.

    Attributes
    ----------
    eta : float
        Lamb-Dicke parameter.
    omega_z : float
        Trap angular frequency (rad/us).
    omega_0 : float
        Maximal bare Rabi angular frequency (rad/us).
    total_time : float
        Pulse duration T (us).
    n_steps : int
        Number of piecewise-constant intervals on [0, T].
    n_max : int
        Highest retained Fock level; the space has dimension 2*(n_max + 1).
    resonant_only : bool
        Drop the off-resonant terms that rotate at omega_z.
    """

    eta: float = 0.25
    omega_z: float = 2.0 * math.pi * 1.4
    omega_0: float = 2.0 * math.pi * 0.05
    total_time: float = 300.0
    n_steps: int = 1000
    n_max: int = 14
    resonant_only: bool = False

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be non-negative, got {self.eta}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if not self.total_time > 0:
            raise ValueError(f"total_time must be positive, got {self.total_time}")
        if self.omega_z > 0 and self.omega_0 / self.omega_z > 0.1:
            warnings.warn(
                f"omega_0/omega_z = {self.omega_0 / self.omega_z:.3g} > 0.1; "
                "the neglected fast-rotating terms may matter",
                stacklevel=2,
            )

    @property
    def n_levels(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    @property
    def dt(self) -> float:
        return self.total_time / self.n_steps

    def times(self) -> np.ndarray:
        """Grid points t_j = j*dt, j = 0..n_steps."""
        return np.linspace(0.0, self.total_time, self.n_steps + 1)

    def replace(self, **changes) -> "SystemParams":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return SystemParams(**fields)


def basis_index(spin: int, n: int) -> int:
    return 2 * n + spin


def basis_label(index: int) -> tuple[int, int]:
    """Inverse of :func:`basis_index`: returns (spin, n)."""
    return index % 2, index // 2


def basis_state(params: SystemParams, spin: int, n: int) -> np.ndarray:
    if not 0 <= n <= params.n_max:
        raise ValueError(f"level {n} outside 0..{params.n_max}")
    psi = np.zeros(params.dim, dtype=complex)
    psi[basis_index(spin, n)] = 1.0
    return psi


@dataclass
class PulseSet:
    """Dimensionless amplitudes f(t_j) = Omega(t_j)/Omega_0 for the three fields.

    ``samples`` has shape (3, n_steps + 1) with rows ordered carrier, blue, red.
    """

    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2 or self.samples.shape[0] != 3:
            raise ValueError(f"samples must have shape (3, n_steps+1), got {self.samples.shape}")

    @classmethod
    def zeros(cls, params: SystemParams) -> "PulseSet":
        return cls(np.zeros((3, params.n_steps + 1)))

    @classmethod
    def constant(cls, params: SystemParams, carrier=0.0, blue=0.0, red=0.0) -> "PulseSet":
        """Constant drive on every sample, endpoints included (not an admissible designed pulse)."""
        row = np.ones(params.n_steps + 1)
        return cls(np.vstack([carrier * row, blue * row, red * row]))

    @property
    def n_steps(self) -> int:
        return self.samples.shape[1] - 1

    def scaled(self, factor: float) -> "PulseSet":
        return PulseSet(self.samples * factor)

    def violations(self, atol: float = 0.0) -> list[str]:
        """Constraint violations of a designed pulse: amplitude bound and zero endpoints."""
        problems = []
        peak = float(np.max(np.abs(self.samples))) if self.samples.size else 0.0
        if peak > 1.0 + atol:
            problems.append(f"amplitude {peak:.6g} exceeds 1")
        ends = np.abs(self.samples[:, [0, -1]])
        if np.any(ends > atol):
            problems.append(f"non-zero endpoint amplitude {float(ends.max()):.3g}")
        return problems

    def is_admissible(self, atol: float = 0.0) -> bool:
        return not self.violations(atol)


def laguerre(n: int, k: int, x: float) -> float:
    """Generalised Laguerre polynomial L_n^k(x) by upward three-term recurrence."""
    if n < 0 or k < 0:
        raise ValueError("laguerre requires n >= 0 and k >= 0")
    prev, cur = 1.0, 1.0 + k - x
    if n == 0:
        return prev
    for j in range(1, n):
        prev, cur = cur, ((2 * j + 1 + k - x) * cur - (j + k) * prev) / (j + 1)
    return cur


def matrix_element(n: int, delta_n: int, eta: float) -> complex:
    """Relative coupling M_{n, n+delta_n}(eta) between |n> and |n + delta_n>."""
    if n < 0:
        raise ValueError(f"phonon number must be non-negative, got {n}")
    x = eta * eta
    damp = math.exp(-x / 2.0)
    if delta_n == 0:
        return complex(damp * laguerre(n, 0, x), 0.0)
    if delta_n == 1:
        return 1j * damp * eta * math.sqrt(1.0 / (n + 1)) * laguerre(n, 1, x)
    if delta_n == -1:
        if n == 0:
            raise ValueError("no level below the motional ground state (n=0, delta_n=-1)")
        return 1j * damp * eta * math.sqrt(1.0 / n) * laguerre(n - 1, 1, x)
    raise ValueError(f"delta_n must be -1, 0 or +1, got {delta_n}")


@lru_cache(maxsize=64)
def _coupling_terms(eta: float, n_max: int, omega_0: float, resonant_only: bool):
    """Active coupling terms as (fields, delta_n, phase multipliers, band values).

    ``values[i, n]`` is (Omega_0/2) M_{n, n+delta_n} for the i-th term, the
    coefficient of |up, n + delta_n><down, n|; entries leaving the truncated
    space are zero.
    """
    d = n_max + 1
    terms = [t for t in COUPLING_TERMS if not resonant_only or t[2] == 0]
    values = np.zeros((len(terms), d), dtype=complex)
    for i, (_, dn, _) in enumerate(terms):
        for n in range(d):
            if 0 <= n + dn < d:
                values[i, n] = 0.5 * omega_0 * matrix_element(n, dn, eta)
    fields = np.array([t[0] for t in terms])
    shifts = np.array([t[1] for t in terms])
    kphase = np.array([t[2] for t in terms], dtype=float)
    values.setflags(write=False)
    return fields, shifts, kphase, values


def coupling_bands(params: SystemParams, amplitudes: np.ndarray, times: np.ndarray):
    """Tridiagonal down-to-up coupling B(t) for a batch of (amplitude triple, time) pairs.

    ``amplitudes`` has shape (S, 3) and ``times`` shape (S,). Returns
    (diag, sub, sup) with B[n, n] = diag[:, n], B[n+1, n] = sub[:, n] and
    B[n, n+1] = sup[:, n], so that H = |up><down| (x) B + h.c.
    """
    fields, shifts, kphase, values = _coupling_terms(
        float(params.eta), params.n_max, float(params.omega_0), bool(params.resonant_only)
    )
    amplitudes = np.atleast_2d(np.asarray(amplitudes, dtype=float))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    coeff = amplitudes[:, fields] * np.exp(1j * params.omega_z * np.outer(times, kphase))
    d = params.n_levels
    diag = coeff[:, shifts == 0] @ values[shifts == 0]
    # |up, n+1><down, n| terms fill the subdiagonal, |up, n-1><down, n| the superdiagonal
    sub = (coeff[:, shifts == 1] @ values[shifts == 1])[:, : d - 1]
    sup = (coeff[:, shifts == -1] @ values[shifts == -1])[:, 1:]
    return np.ascontiguousarray(diag), np.ascontiguousarray(sub), np.ascontiguousarray(sup)


def bands_to_blocks(diag: np.ndarray, sub: np.ndarray, sup: np.ndarray) -> np.ndarray:
    s, d = diag.shape
    b = np.zeros((s, d, d), dtype=complex)
    idx = np.arange(d)
    b[:, idx, idx] = diag
    b[:, idx[1:], idx[:-1]] = sub
    b[:, idx[:-1], idx[1:]] = sup
    return b


def coupling_blocks(params: SystemParams, amplitudes: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Dense form of :func:`coupling_bands`, shape (S, n_max+1, n_max+1)."""
    return bands_to_blocks(*coupling_bands(params, amplitudes, times))


def embed_blocks(b: np.ndarray) -> np.ndarray:
    """Full Hamiltonian(s) in the flat basis from down-to-up blocks B."""
    b = np.asarray(b)
    d = b.shape[-1]
    h = np.zeros(b.shape[:-2] + (2 * d, 2 * d), dtype=complex)
    h[..., 1::2, 0::2] = b
    h[..., 0::2, 1::2] = np.conj(np.swapaxes(b, -1, -2))
    return h


def assemble_hamiltonian(params: SystemParams, amplitudes, t: float) -> np.ndarray:
    """Hermitian Hamiltonian at time ``t`` for the amplitude triple (carrier, blue, red)."""
    amps = np.asarray(amplitudes, dtype=float).reshape(1, 3)
    return embed_blocks(coupling_blocks(params, amps, np.array([t]))[0])
