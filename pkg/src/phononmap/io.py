"""Pulse CSV files, JSON results and the run manifest."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .system import FIELDS, PulseSet

PULSE_HEADER = ["t_us"] + [f"f_{name}" for name in FIELDS]


def write_pulse_csv(path, pulses: PulseSet, times: np.ndarray) -> Path:
    """One row per grid point; repr() keeps every float bit-exact on re-read."""
    path = Path(path)
    times = np.asarray(times, dtype=float)
    if times.size != pulses.samples.shape[1]:
        raise ValueError(f"{times.size} time points for {pulses.samples.shape[1]} samples")
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PULSE_HEADER)
        for j, t in enumerate(times):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in pulses.samples[:, j]])
    return path


def read_pulse_csv(path) -> tuple[PulseSet, np.ndarray]:
    """Inverse of :func:`write_pulse_csv`; returns (pulses, times)."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != PULSE_HEADER:
        raise ValueError(f"{path}: expected header {','.join(PULSE_HEADER)}")
    body = [r for r in rows[1:] if r]
    if len(body) < 2:
        raise ValueError(f"{path}: need at least two grid points")
    data = np.array([[float(c) for c in r] for r in body])
    if data.shape[1] != 4:
        raise ValueError(f"{path}: expected 4 columns per row")
    return PulseSet(data[:, 1:].T.copy()), data[:, 0].copy()


def grid_from_times(times: np.ndarray) -> tuple[float, int]:
    """(T, n_steps) of a uniform grid starting at 0."""
    times = np.asarray(times, dtype=float)
    n_steps = times.size - 1
    T = float(times[-1])
    if times[0] != 0.0 or not np.allclose(times, np.linspace(0.0, T, n_steps + 1), rtol=0, atol=1e-9 * max(T, 1.0)):
        raise ValueError("pulse times must form a uniform grid starting at t = 0")
    return T, n_steps


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    return path


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
