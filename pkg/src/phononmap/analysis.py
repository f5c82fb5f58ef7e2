"""Calibration robustness, truncation convergence and fidelity-vs-N scans."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, replace

import numpy as np

from .crab import SearchConfig, evaluate_pulse, optimize_discrete, optimize_map
from .propagator import evolve_basis
from .system import PulseSet, SystemParams

log = logging.getLogger(__name__)

DISCRETE_N_MAX = 5


def default_xi_grid(half_width: float = 0.01, points: int = 21) -> np.ndarray:
    xi = np.linspace(-half_width, half_width, points)
    if points % 2:
        xi[points // 2] = 0.0  # exact zero even after rounding
    return xi


@dataclass
class RobustnessCurve:
    """F(m, N) with every pulse sample scaled by (1 + xi)."""

    xi: np.ndarray
    F: np.ndarray
    F0: float

    @property
    def drop(self) -> float:
        """Largest fall below the unperturbed fidelity (0 if F never falls)."""
        return float(max(0.0, self.F0 - np.min(self.F)))

    @property
    def peak_to_peak(self) -> float:
        return float(np.max(self.F) - np.min(self.F))

    def to_dict(self) -> dict:
        return {
            "xi": self.xi.tolist(),
            "F": self.F.tolist(),
            "F0": self.F0,
            "drop": self.drop,
            "peak_to_peak": self.peak_to_peak,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["xi", "F"])
        for x, f in zip(self.xi, self.F):
            w.writerow([repr(float(x)), repr(float(f))])
        return buf.getvalue()


def scan_calibration(pulses: PulseSet, params: SystemParams, m: int, N: int, xi_grid=None) -> RobustnessCurve:
    """Fidelity under a static relative miscalibration xi of all Rabi frequencies.

    Scaled samples may exceed |f| = 1; that is the physical effect being probed.
    """
    xi = default_xi_grid() if xi_grid is None else np.asarray(xi_grid, dtype=float)
    if xi.ndim != 1 or not np.any(xi == 0.0):
        raise ValueError("xi_grid must be a 1-D grid containing 0")
    F = np.empty(xi.size)
    for i, x in enumerate(xi):
        scaled = pulses if x == 0.0 else pulses.scaled(1.0 + x)
        F[i] = evaluate_pulse(scaled, m, N, params).F
    F0 = float(F[np.flatnonzero(xi == 0.0)[0]])
    return RobustnessCurve(xi, F, F0)


@dataclass
class TruncationReport:
    n_max: int
    n_max_big: int
    F: float
    F_big: float
    max_population_diff: float

    @property
    def delta_F(self) -> float:
        return abs(self.F_big - self.F)

    def to_dict(self) -> dict:
        return {
            "n_max": self.n_max,
            "n_max_big": self.n_max_big,
            "F": self.F,
            "F_big": self.F_big,
            "delta_F": self.delta_F,
            "max_population_diff": self.max_population_diff,
        }


def _populations(params: SystemParams, pulses: PulseSet, N: int) -> np.ndarray:
    """|amplitude|^2 of every evolved column, shape (dim, N)."""
    return np.abs(evolve_basis(params, pulses, N).finals) ** 2


def check_truncation(pulses: PulseSet, params: SystemParams, m: int, N: int, n_max_big: int = 19) -> TruncationReport:
    """Recompute F(m, N) with Fock space cut at ``n_max_big`` instead of params.n_max.

    The pulse samples live on the time grid only, so they carry over unchanged.
    """
    if n_max_big < params.n_max:
        raise ValueError("comparison space must not be smaller than the reference space")
    big = params.replace(n_max=n_max_big)
    F = evaluate_pulse(pulses, m, N, params).F
    F_big = evaluate_pulse(pulses, m, N, big).F
    p = _populations(params, pulses, N)
    p_big = _populations(big, pulses, N)
    diff = np.abs(p_big[: p.shape[0]] - p).max()
    diff = max(diff, float(p_big[p.shape[0]:].max(initial=0.0)))
    return TruncationReport(params.n_max, n_max_big, F, F_big, float(diff))


@dataclass
class ScalingRow:
    N: int
    F: float
    T_opt: float  # us
    scenario: str
    n_evals: int = 0

    @property
    def one_minus_F(self) -> float:
        return 1.0 - self.F


def scaling_run(m: int, T: float, N_list, scenario: str = "carrier+red",
                params: SystemParams | None = None, config: SearchConfig | None = None) -> list[ScalingRow]:
    """Optimise U_m over the first N levels for each N at fixed duration T (us).

    The phase-flip scenario is only run for N <= 5; larger N are skipped.
    """
    N_list = list(N_list)
    if not N_list:
        raise ValueError("N_list must not be empty")
    params = (params or SystemParams()).replace(total_time=float(T))
    config = replace(config or SearchConfig(), scenario=scenario)
    rows = []
    for N in N_list:
        if config.discrete and N > DISCRETE_N_MAX:
            log.warning("skipping N = %d for the phase-flip scenario (limited to N <= %d)", N, DISCRETE_N_MAX)
            continue
        opt = optimize_discrete if config.discrete else optimize_map
        res = opt(m, N, params, config)
        log.info("%s N=%d: F = %.6f", scenario, N, res.F)
        rows.append(ScalingRow(N, res.F, params.total_time, scenario, res.n_evals))
    return rows


def count_inversions(rows: list[ScalingRow]) -> int:
    """Number of adjacent pairs (ordered by N) where F increases with N."""
    F = [r.F for r in sorted(rows, key=lambda r: r.N)]
    return sum(1 for a, b in zip(F, F[1:]) if b > a)


def scaling_to_csv(rows: list[ScalingRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "one_minus_F", "T_opt_us"])
    for r in rows:
        w.writerow([r.N, repr(r.one_minus_F), repr(r.T_opt)])
    return buf.getvalue()
