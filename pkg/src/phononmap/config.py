"""Strictly parsed JSON experiment configuration.

Every block rejects unknown keys; the error message names the offending key by
its dotted path (e.g. ``control.budgett``).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .crab import SCENARIOS, SearchConfig
from .system import SystemParams, khz_to_angular

TASKS = ("optimize", "evaluate", "robustness", "poincare", "qnd", "scaling")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class SystemBlock:
    eta: float = 0.25
    omega_z_kHz: float = 1400.0
    omega_0_kHz: float = 50.0
    T_us: float = 300.0
    n_steps: int = 1000
    n_max: int = 14
    resonant_only: bool = False

    def params(self) -> SystemParams:
        return SystemParams(
            eta=self.eta,
            omega_z=khz_to_angular(self.omega_z_kHz),
            omega_0=khz_to_angular(self.omega_0_kHz),
            total_time=self.T_us,
            n_steps=self.n_steps,
            n_max=self.n_max,
            resonant_only=self.resonant_only,
        )


@dataclass
class ControlBlock:
    # optimize also accepts lists for scenario and m (one run per combination)
    scenario: str | list = "three-field"
    m: int | list = 0
    N: int = 10
    K: int = 12
    restarts: int = 8
    budget: int = 20000
    seed: int = 0
    threads: int = 1

    def scenarios(self) -> list[str]:
        return list(self.scenario) if isinstance(self.scenario, list) else [self.scenario]

    def m_values(self) -> list[int]:
        return list(self.m) if isinstance(self.m, list) else [self.m]

    def search(self, scenario: str) -> SearchConfig:
        return SearchConfig(
            scenario=scenario, K=self.K, restarts=self.restarts, budget=self.budget,
            seed=self.seed, threads=self.threads,
        )


@dataclass
class RobustnessBlock:
    xi_half_width: float = 0.01
    points: int = 21


@dataclass
class PoincareBlock:
    N_values: list = field(default_factory=lambda: [2, 3, 4, 5])
    eps: float = 0.02
    t_max_factor: float = 50.0
    t_opt_us: dict = field(default_factory=dict)  # N -> optimised duration in us


@dataclass
class QndBlock:
    m_prime: int = 0
    nbar: float = 1.0
    channel: str | None = None  # Kraus JSON file; identity when absent
    maps: str = "ideal"  # "ideal" or "pulses"
    pulses: dict = field(default_factory=dict)  # level -> pulse CSV, for maps = "pulses"


@dataclass
class ScalingBlock:
    N_list: list = field(default_factory=lambda: list(range(2, 11)))


@dataclass
class ExperimentConfig:
    task: str = "optimize"
    output: str = "run"
    pulse: str | None = None  # pulse CSV for evaluate / robustness
    system: SystemBlock = field(default_factory=SystemBlock)
    control: ControlBlock = field(default_factory=ControlBlock)
    robustness: RobustnessBlock = field(default_factory=RobustnessBlock)
    poincare: PoincareBlock = field(default_factory=PoincareBlock)
    qnd: QndBlock = field(default_factory=QndBlock)
    scaling: ScalingBlock = field(default_factory=ScalingBlock)
    base_dir: Path = field(default=Path("."), repr=False, compare=False)

    def resolve(self, path: str) -> Path:
        """Relative paths inside a config file are relative to that file."""
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d


_BLOCKS = {
    "system": SystemBlock,
    "control": ControlBlock,
    "robustness": RobustnessBlock,
    "poincare": PoincareBlock,
    "qnd": QndBlock,
    "scaling": ScalingBlock,
}

_INT_LISTS = {"control.m", "poincare.N_values", "scaling.N_list"}


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_value(key: str, value, default):
    """Type-check ``value`` against the field's default; returns the coerced value."""
    if key in ("control.scenario",):
        names = value if isinstance(value, list) else [value]
        if not names or any(n not in SCENARIOS for n in names):
            raise ConfigError(key, f"must be one of {sorted(SCENARIOS)} (or a list of them)")
        return value
    if key in _INT_LISTS:
        if _is_int(value) and key == "control.m":
            return value
        if not isinstance(value, list) or not value or not all(_is_int(v) for v in value):
            raise ConfigError(key, "must be a non-empty list of integers")
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, "must be true or false")
        return value
    if _is_int(default):
        if not _is_int(value):
            raise ConfigError(key, "must be an integer")
        return value
    if isinstance(default, float):
        if not (_is_int(value) or isinstance(value, float)):
            raise ConfigError(key, "must be a number")
        return float(value)
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(key, "must be an object")
        return value
    # optional strings
    if value is not None and not isinstance(value, str):
        raise ConfigError(key, "must be a string")
    return value


def _load_block(cls, data, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(prefix, "must be an object")
    known = {f.name: f for f in fields(cls)}
    block = cls()
    for key, value in data.items():
        path = f"{prefix}.{key}"
        if key not in known:
            raise ConfigError(path, "unknown key")
        setattr(block, key, _check_value(path, value, getattr(block, key)))
    return block


def _validate(cfg: ExperimentConfig) -> None:
    s, c = cfg.system, cfg.control
    checks = [
        ("system.eta", s.eta >= 0, "must be non-negative"),
        ("system.T_us", s.T_us > 0, "must be positive"),
        ("system.n_steps", s.n_steps >= 1, "must be >= 1"),
        ("system.n_max", s.n_max >= 1, "must be >= 1"),
        ("control.N", 1 <= c.N <= s.n_max + 1, "must lie in 1..n_max+1"),
        ("control.K", c.K >= 1, "must be >= 1"),
        ("control.restarts", c.restarts >= 1, "must be >= 1"),
        ("control.budget", c.budget >= 0, "must be >= 0"),
        ("control.threads", c.threads >= 1, "must be >= 1"),
        ("robustness.points", cfg.robustness.points >= 1, "must be >= 1"),
        ("poincare.eps", 0 < cfg.poincare.eps < 1, "must lie in (0, 1)"),
        ("qnd.maps", cfg.qnd.maps in ("ideal", "pulses"), "must be 'ideal' or 'pulses'"),
        ("qnd.nbar", cfg.qnd.nbar >= 0, "must be non-negative"),
    ]
    for key, ok, msg in checks:
        if not ok:
            raise ConfigError(key, msg)
    for m in c.m_values():
        if not 0 <= m < c.N:
            raise ConfigError("control.m", f"level {m} must satisfy 0 <= m < N = {c.N}")
    if cfg.task in ("evaluate",) and cfg.pulse is None:
        raise ConfigError("pulse", f"task {cfg.task!r} needs a pulse CSV")
    if cfg.task != "optimize" and (isinstance(c.scenario, list) or isinstance(c.m, list)):
        raise ConfigError("control.m", "lists of m or scenario are only accepted by task 'optimize'")


def parse_config(data: dict, base_dir: Path | str = ".") -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    cfg = ExperimentConfig(base_dir=Path(base_dir))
    for key, value in data.items():
        if key in _BLOCKS:
            setattr(cfg, key, _load_block(_BLOCKS[key], value, key))
        elif key == "task":
            if value not in TASKS:
                raise ConfigError("task", f"must be one of {list(TASKS)}")
            cfg.task = value
        elif key in ("output", "pulse"):
            if not isinstance(value, str):
                raise ConfigError(key, "must be a string")
            setattr(cfg, key, value)
        else:
            raise ConfigError(key, "unknown key")
    _validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON ({exc})") from exc
    return parse_config(data, path.parent)
