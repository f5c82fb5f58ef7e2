"""Waiting times for a constant blue-sideband drive to realise U_m by recurrence.

Under a constant resonant blue drive each |down, n> Rabi-rotates into |up, n+1>
at its own frequency Omega_n = Omega_0 |M_{n,n+1}|, so the N ladders behave like
N incommensurate pointers. The selective map is reached when pointer m sits at a
pi rotation and all others near a full turn.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np

from .system import SystemParams, matrix_element

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PointerSystem:
    frequencies: np.ndarray  # Omega_n, rad/us
    m: int
    eps: float = 0.02

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        object.__setattr__(self, "frequencies", freqs)
        if freqs.ndim != 1 or freqs.size < 1:
            raise ValueError("need at least one pointer")
        if not 0 <= self.m < freqs.size:
            raise ValueError(f"target pointer m = {self.m} outside 0..{freqs.size - 1}")
        if np.any(np.diff(freqs) <= 0):
            warnings.warn("pointer frequencies are not strictly increasing", stacklevel=2)

    @classmethod
    def from_params(cls, params: SystemParams, N: int, m: int, eps: float = 0.02) -> "PointerSystem":
        freqs = [params.omega_0 * abs(matrix_element(n, 1, params.eta)) for n in range(N)]
        return cls(np.array(freqs), m, eps)

    @property
    def N(self) -> int:
        return self.frequencies.size


def circular_distance(a, b):
    """Shortest angular distance between angles a and b, in [0, pi]."""
    return np.abs(np.mod(np.asarray(a) - b + math.pi, TWO_PI) - math.pi)


def pointer_deviations(sys: PointerSystem, t) -> np.ndarray:
    """Half-angle deviations from the target rotation of each pointer at time(s) t.

    Shape (N,) for scalar t, (len(t), N) otherwise. With these, the spin-up
    probability of ladder m is cos^2 of its deviation and that of ladder n != m is
    sin^2 of its deviation.
    """
    t_arr = np.asarray(t, dtype=float)
    theta = np.multiply.outer(t_arr, sys.frequencies)
    target = np.zeros(sys.N)
    target[sys.m] = math.pi
    return 0.5 * circular_distance(theta, target)


def fidelity_error(sys: PointerSystem, dphi: np.ndarray) -> np.ndarray:
    """Small-angle error dphi_m^2 + sum_{n != m} dphi_n^2 / (N - 1)."""
    sq = np.asarray(dphi) ** 2
    own = sq[..., sys.m]
    if sys.N == 1:
        return own
    return own + (np.sum(sq, axis=-1) - own) / (sys.N - 1)


def analytic_recurrence_time(sys: PointerSystem) -> float:
    """Recurrence estimate with equal tolerances dphi_n = sqrt(eps/2) on every pointer."""
    if not 0 < sys.eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {sys.eps}")
    rate = (sys.eps / 2.0) ** ((sys.N - 1) / 2.0) / TWO_PI**sys.N * float(np.sum(sys.frequencies))
    return 1.0 / rate


@dataclass
class WaitResult:
    """First time a pointer condition holds; ``best`` is the smallest excess seen."""

    time: float | None
    found: bool
    best: float
    best_time: float

    def in_units(self, omega_0: float) -> float:
        return float("nan") if self.time is None else self.time * omega_0


@numba.njit(cache=True)
def _first_crossing(freqs, m, mode, bound, dt, n_max_steps):
    """Scan t = i*dt, i >= 1. Returns (index or -1, best excess, index of best)."""
    n = freqs.size
    best = np.inf
    best_i = 0
    for i in range(1, n_max_steps + 1):
        t = i * dt
        acc = 0.0
        for k in range(n):
            th = freqs[k] * t
            if k == m:
                th -= math.pi
            dev = abs((th + math.pi) % TWO_PI - math.pi) * 0.5
            if mode == 0:
                if k == m:
                    acc += dev * dev
                else:
                    acc += dev * dev / (n - 1)
            elif dev > acc:
                acc = dev
        excess = acc - bound
        if excess < best:
            best = excess
            best_i = i
        if excess <= 0.0:
            return i, best, best_i
    return -1, best, best_i


def _condition(sys: PointerSystem, mode: int):
    bound = sys.eps if mode == 0 else math.sqrt(sys.eps / 2.0)

    def excess(t):
        dphi = pointer_deviations(sys, t)
        val = fidelity_error(sys, dphi) if mode == 0 else np.max(dphi)
        return float(val) - bound

    return excess, bound


def _wait(sys: PointerSystem, mode: int, t_max: float, dt: float | None, rtol: float) -> WaitResult:
    if dt is None:
        dt = 0.005 * TWO_PI / float(np.max(sys.frequencies))
    if dt > 0.01 * TWO_PI / float(np.max(sys.frequencies)):
        raise ValueError("grid step too coarse to resolve the fastest pointer")
    excess, bound = _condition(sys, mode)
    n_steps = int(math.floor(t_max / dt))
    idx, best, best_i = _first_crossing(sys.frequencies, sys.m, mode, bound, dt, n_steps)
    if idx < 0:
        return WaitResult(None, False, float(best), best_i * dt)
    lo, hi = (idx - 1) * dt, idx * dt
    # refine only a genuine crossing; if the condition already held at lo (only
    # possible at t = 0) the first grid point is the answer
    if excess(lo) > 0.0:
        while hi - lo > rtol * hi:
            mid = 0.5 * (lo + hi)
            if excess(mid) <= 0.0:
                hi = mid
            else:
                lo = mid
    return WaitResult(hi, True, float(min(best, excess(hi))), hi)


def waiting_time_fidelity(sys: PointerSystem, t_max: float, dt: float | None = None, rtol: float = 1e-6) -> WaitResult:
    """First t > 0 with dphi_m^2 + sum_{n != m} dphi_n^2/(N-1) <= eps."""
    return _wait(sys, 0, t_max, dt, rtol)


def waiting_time_uniform(sys: PointerSystem, t_max: float, dt: float | None = None, rtol: float = 1e-6) -> WaitResult:
    """First t > 0 with every dphi_n <= sqrt(eps/2)."""
    return _wait(sys, 1, t_max, dt, rtol)


@dataclass
class PoincareRow:
    N: int
    m: int
    T_P: float
    T_F: float
    T_dphi: float
    T_opt: float = float("nan")


def poincare_table(
    params: SystemParams,
    N_values=(2, 3, 4, 5),
    eps: float = 0.02,
    t_max_factor: float = 50.0,
    t_opt: dict[int, float] | None = None,
) -> list[PoincareRow]:
    """Recurrence and waiting times for every (N, m), all in units of 1/Omega_0.

    The scan for each case runs up to ``t_max_factor`` times the analytic estimate.
    ``t_opt`` maps N to an optimised operation time in us.
    """
    rows = []
    w0 = params.omega_0
    for N in N_values:
        for m in range(N):
            sys = PointerSystem.from_params(params, N, m, eps)
            t_p = analytic_recurrence_time(sys)
            t_max = t_max_factor * t_p
            tf = waiting_time_fidelity(sys, t_max)
            tu = waiting_time_uniform(sys, t_max)
            topt = (t_opt or {}).get(N, float("nan"))
            rows.append(PoincareRow(N, m, t_p * w0, tf.in_units(w0), tu.in_units(w0), topt * w0))
    return rows


def rows_to_csv(rows: list[PoincareRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["N", "m", "T_P", "T_F", "T_dphi", "T_opt"])
    for r in rows:
        writer.writerow([r.N, r.m, repr(r.T_P), repr(r.T_F), repr(r.T_dphi), repr(r.T_opt)])
    return buf.getvalue()
