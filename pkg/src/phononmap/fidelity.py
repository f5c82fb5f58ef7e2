"""Mapping fidelity F(m, N) = F_up * F_down of a selective spin flip."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .propagator import EvolvedBasis


@dataclass
class MapReport:
    """Spin-up populations of the evolved basis and the resulting fidelity.

    ``p_up[n]`` is the spin-up probability after the map for initial state
    |down, n>, summed over every retained Fock level. ``p_up_subspace`` restricts
    that sum to Fock levels k < N and ``F_subspace`` is the fidelity built from it.
    """

    m: int
    N: int
    F: float
    F_up: float
    F_down: float
    p_up: list[float]
    p_up_subspace: list[float] = field(default_factory=list)
    F_subspace: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        keys = ("m", "N", "F", "F_up", "F_down", "p_up")
        return json.dumps({k: getattr(self, k) for k in keys}, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "p_up"])
        for n, p in enumerate(self.p_up):
            writer.writerow([n, repr(float(p))])
        return buf.getvalue()


def fidelity_from_populations(p_up, m: int) -> tuple[float, float, float]:
    """(F, F_up, F_down) from the per-level spin-up probabilities."""
    p_up = np.asarray(p_up, dtype=float)
    n_states = p_up.size
    if n_states < 2:
        raise ValueError("F_down needs at least two basis states (N >= 2)")
    if not 0 <= m < n_states:
        raise ValueError(f"target level m = {m} must satisfy 0 <= m < N = {n_states}")
    f_up = float(p_up[m])
    f_down = float((np.sum(1.0 - p_up) - (1.0 - p_up[m])) / (n_states - 1))
    return f_up * f_down, f_up, f_down


def spin_up_populations(finals: np.ndarray, max_level: int | None = None) -> np.ndarray:
    """Spin-up probability of each column state, over Fock levels k <= max_level."""
    up = finals[1::2]
    if max_level is not None:
        up = up[: max_level + 1]
    return np.sum(np.abs(up) ** 2, axis=0)


def fidelity(basis: EvolvedBasis, m: int, N: int) -> MapReport:
    if N < 2:
        raise ValueError("F_down needs at least two basis states (N >= 2)")
    if not 0 <= m < N:
        raise ValueError(f"target level m = {m} must satisfy 0 <= m < N = {N}")
    if N > basis.n_states:
        raise ValueError(f"N = {N} exceeds the {basis.n_states} evolved states")
    finals = basis.finals[:, :N]
    p_up = spin_up_populations(finals)
    p_sub = spin_up_populations(finals, max_level=N - 1)
    F, f_up, f_down = fidelity_from_populations(p_up, m)
    # k <= N-1 variant: spin-down population is counted on the same restricted range
    down_sub = np.sum(np.abs(finals[0::2][:N]) ** 2, axis=0)
    f_up_sub = float(p_sub[m])
    f_down_sub = float((np.sum(down_sub) - down_sub[m]) / (N - 1))
    return MapReport(
        m=m,
        N=N,
        F=F,
        F_up=f_up,
        F_down=f_down,
        p_up=[float(x) for x in p_up],
        p_up_subspace=[float(x) for x in p_sub],
        F_subspace=f_up_sub * f_down_sub,
    )
