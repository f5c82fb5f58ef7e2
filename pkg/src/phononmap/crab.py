"""Chopped random basis (CRAB) pulse parametrisation and multi-start optimisation."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fidelity import MapReport, fidelity
from .propagator import evolve_basis
from .simplex import SearchOptions, SearchResult, direct_search
from .system import FIELDS, PulseSet, SystemParams

log = logging.getLogger(__name__)

SCENARIOS = {
    "three-field": ("carrier", "blue", "red"),
    "carrier+blue": ("carrier", "blue"),
    "carrier+red": ("carrier", "red"),
    "discrete": ("carrier", "red"),
}


@dataclass
class CrabParams:
    """Fourier coefficients and jittered frequencies of every active field.

    For field alpha, raw(t) = sum_k a[alpha][k] sin(w_k t) + b[alpha][k] cos(w_k t)
    with w_k = 2 pi k (1 + r[alpha][k]) / T, k = 1..K.
    """

    fields: tuple[str, ...]
    a: np.ndarray  # (n_fields, K)
    b: np.ndarray  # (n_fields, K)
    r: np.ndarray  # (n_fields, K), jitters in [-0.5, 0.5]
    seed: int | None = None

    def __post_init__(self):
        self.fields = tuple(self.fields)
        unknown = set(self.fields) - set(FIELDS)
        if unknown:
            raise ValueError(f"unknown fields {sorted(unknown)}")
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.b = np.atleast_2d(np.asarray(self.b, dtype=float))
        self.r = np.atleast_2d(np.asarray(self.r, dtype=float))
        shape = (len(self.fields), self.a.shape[1])
        if self.a.shape != shape or self.b.shape != shape or self.r.shape != shape:
            raise ValueError("a, b and r must all have shape (n_fields, K)")
        if shape[1] < 1:
            raise ValueError("need at least one harmonic (K >= 1)")
        if np.any(np.abs(self.r) > 0.5):
            raise ValueError("frequency jitters must lie in [-0.5, 0.5]")
        scaled = np.arange(1, shape[1] + 1) * (1.0 + self.r)
        if any(np.unique(row).size < shape[1] for row in scaled):
            raise ValueError("CRAB frequencies within a field must be distinct")

    @property
    def K(self) -> int:
        return self.a.shape[1]

    def frequencies(self, total_time: float) -> np.ndarray:
        k = np.arange(1, self.K + 1)
        return 2.0 * math.pi * k * (1.0 + self.r) / total_time

    def vector(self) -> np.ndarray:
        """Search vector: per field, the K sine then the K cosine coefficients."""
        return np.concatenate([np.concatenate([a, b]) for a, b in zip(self.a, self.b)])

    def with_vector(self, x) -> "CrabParams":
        x = np.asarray(x, dtype=float).reshape(len(self.fields), 2, self.K)
        return CrabParams(self.fields, x[:, 0].copy(), x[:, 1].copy(), self.r.copy(), self.seed)

    def to_dict(self) -> dict:
        return {
            "fields": list(self.fields),
            "K": self.K,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "r": self.r.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CrabParams":
        return cls(tuple(d["fields"]), d["a"], d["b"], d["r"], d.get("seed"))


def raw_series(crab: CrabParams, times: np.ndarray, total_time: float) -> np.ndarray:
    """Unshaped Fourier series of every active field, shape (n_fields, len(times))."""
    phase = crab.frequencies(total_time)[:, :, None] * times[None, None, :]
    return np.einsum("fk,fkt->ft", crab.a, np.sin(phase)) + np.einsum(
        "fk,fkt->ft", crab.b, np.cos(phase)
    )


def _place(crab: CrabParams, rows: np.ndarray, n_samples: int) -> PulseSet:
    samples = np.zeros((3, n_samples))
    for row, name in zip(rows, crab.fields):
        samples[FIELDS.index(name)] = row
    return PulseSet(samples)


def synthesize_pulse(crab: CrabParams, params: SystemParams) -> PulseSet:
    """sin^2(pi t/T)-enveloped series, clipped to [-1, 1], with exact zero endpoints."""
    t = params.times()
    envelope = np.sin(math.pi * t / params.total_time) ** 2
    shaped = np.clip(envelope * raw_series(crab, t, params.total_time), -1.0, 1.0)
    shaped[:, 0] = 0.0
    shaped[:, -1] = 0.0
    return _place(crab, shaped, t.size)


def synthesize_discrete(crab: CrabParams, params: SystemParams) -> PulseSet:
    """Phase-flip pulse: +1/-1 by the sign of the raw series (ties -> +1), zero endpoints."""
    t = params.times()
    flips = np.where(raw_series(crab, t, params.total_time) >= 0.0, 1.0, -1.0)
    flips[:, 0] = 0.0
    flips[:, -1] = 0.0
    return _place(crab, flips, t.size)


def evaluate_pulse(pulses: PulseSet, m: int, N: int, params: SystemParams) -> MapReport:
    return fidelity(evolve_basis(params, pulses, N), m, N)


def objective(crab: CrabParams, m: int, N: int, params: SystemParams, discrete: bool = False) -> float:
    """1 - F(m, N) of the synthesised pulse; lower is better."""
    synth = synthesize_discrete if discrete else synthesize_pulse
    return 1.0 - evaluate_pulse(synth(crab, params), m, N, params).F


@dataclass
class SearchConfig:
    """Knobs of the multi-start search (desk-scale defaults)."""

    scenario: str = "three-field"
    K: int = 12
    restarts: int = 8
    budget: int = 20000
    seed: int = 0
    init_scale: float = 0.3
    step: float = 0.1
    tol_x: float = 1e-8
    tol_f: float = 1e-10
    threads: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {sorted(SCENARIOS)}")
        if self.K < 1 or self.restarts < 1 or self.budget < 0:
            raise ValueError("K and restarts must be >= 1 and budget >= 0")

    @property
    def fields(self) -> tuple[str, ...]:
        return SCENARIOS[self.scenario]

    @property
    def discrete(self) -> bool:
        return self.scenario == "discrete"


@dataclass
class RestartRecord:
    index: int
    f_best: float
    n_evals: int
    reason: str
    trace: list[float]


@dataclass
class OptResult:
    crab: CrabParams
    pulses: PulseSet
    report: MapReport
    n_evals: int
    restarts: list[RestartRecord]
    wall_time: float
    best_restart: int
    config: SearchConfig = field(default_factory=SearchConfig)

    @property
    def F(self) -> float:
        return self.report.F

    @property
    def traces(self) -> list[list[float]]:
        return [r.trace for r in self.restarts]

    def to_dict(self) -> dict:
        return {
            "F": self.report.F,
            "report": self.report.to_dict(),
            "crab": self.crab.to_dict(),
            "n_evals": self.n_evals,
            "best_restart": self.best_restart,
            "wall_time_s": self.wall_time,
            "restarts": [
                {"index": r.index, "f_best": r.f_best, "n_evals": r.n_evals, "reason": r.reason, "trace": r.trace}
                for r in self.restarts
            ],
        }


def initial_crab(fields, K: int, rng: np.random.Generator, params: SystemParams, init_scale: float = 0.3) -> CrabParams:
    """Random jitters and coefficients U(-init_scale, init_scale).

    Coefficients of any field whose enveloped series would exceed |f| = 1 are scaled
    down so the starting pulse sits in the unclipped regime.
    """
    n = len(fields)
    r = rng.uniform(-0.5, 0.5, size=(n, K))
    k = np.arange(1, K + 1)
    for i in range(n):
        # k (1 + r_k) must be distinct within a field; collisions are redrawn
        while np.unique(k * (1.0 + r[i])).size < K:
            r[i] = rng.uniform(-0.5, 0.5, size=K)
    a = rng.uniform(-init_scale, init_scale, size=(n, K))
    b = rng.uniform(-init_scale, init_scale, size=(n, K))
    crab = CrabParams(fields, a, b, r)
    t = params.times()
    peak = np.max(np.abs(np.sin(math.pi * t / params.total_time) ** 2 * raw_series(crab, t, params.total_time)), axis=1)
    scale = np.where(peak > 1.0, 1.0 / np.maximum(peak, 1e-300), 1.0)
    return CrabParams(fields, a * scale[:, None], b * scale[:, None], r)


def restart_rngs(seed: int, restarts: int) -> list[np.random.Generator]:
    """Independent generator per restart, so any restart can be replayed alone."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(restarts)]


def _run_restart(index, rng, m, N, params, config: SearchConfig):
    crab0 = initial_crab(config.fields, config.K, rng, params, config.init_scale)
    crab0.seed = config.seed

    def f(x):
        return objective(crab0.with_vector(x), m, N, params, discrete=config.discrete)

    opts = SearchOptions(step=config.step, tol_x=config.tol_x, tol_f=config.tol_f, max_evals=config.budget)
    res: SearchResult = direct_search(f, crab0.vector(), opts)
    log.info("restart %d: 1-F = %.6g after %d evaluations (%s)", index, res.f, res.n_evals, res.reason)
    return crab0.with_vector(res.x), res


def _optimize(m: int, N: int, params: SystemParams, config: SearchConfig) -> OptResult:
    if not 0 <= m < N:
        raise ValueError(f"target level m = {m} must satisfy 0 <= m < N = {N}")
    if N > params.n_levels:
        raise ValueError(f"N = {N} exceeds the {params.n_levels} retained Fock levels")
    start = time.perf_counter()
    rngs = restart_rngs(config.seed, config.restarts)
    jobs = [(i, rng, m, N, params, config) for i, rng in enumerate(rngs)]
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(pool.map(lambda job: _run_restart(*job), jobs))
    else:
        outcomes = [_run_restart(*job) for job in jobs]

    records = [
        RestartRecord(i, res.f, res.n_evals, res.reason, res.trace) for i, (_, res) in enumerate(outcomes)
    ]
    best = min(range(len(outcomes)), key=lambda i: (outcomes[i][1].f, i))
    crab = outcomes[best][0]
    synth = synthesize_discrete if config.discrete else synthesize_pulse
    pulses = synth(crab, params)
    report = evaluate_pulse(pulses, m, N, params)
    return OptResult(
        crab=crab,
        pulses=pulses,
        report=report,
        n_evals=sum(r.n_evals for r in records),
        restarts=records,
        wall_time=time.perf_counter() - start,
        best_restart=best,
        config=config,
    )


def optimize_map(m: int, N: int, params: SystemParams, config: SearchConfig | None = None) -> OptResult:
    """Best CRAB pulse for the selective map U_m over the first N Fock levels."""
    config = config or SearchConfig()
    if config.discrete:
        raise ValueError("use optimize_discrete for the phase-flip scenario")
    return _optimize(m, N, params, config)


def optimize_discrete(m: int, N: int, params: SystemParams, config: SearchConfig | None = None) -> OptResult:
    """Best phase-flip (carrier + red, constant power) pulse for U_m."""
    config = config or SearchConfig(scenario="discrete")
    if not config.discrete:
        config = SearchConfig(**{**config.__dict__, "scenario": "discrete"})
    return _optimize(m, N, params, config)
