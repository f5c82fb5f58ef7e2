"""Command-line entry point: ``phononmap run --config path.json``.

Exit status 0 on success, 1 for an invalid configuration, 2 for a failure
while running the task.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from dataclasses import replace
from importlib import metadata, resources
from pathlib import Path

import numpy as np

from . import analysis, io, poincare, qnd
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .crab import evaluate_pulse, optimize_discrete, optimize_map
from .propagator import PropagationError
from .system import SystemParams

log = logging.getLogger("phononmap")

PRESETS = ("map-m0", "map-m1", "map-m2", "map-m3", "field-comparison", "scaling", "waiting-times")


class TaskError(RuntimeError):
    pass


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "scipy", "numba"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {list(PRESETS)}")
    text = resources.files("phononmap.presets").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return parse_config(json.loads(text))


class Run:
    """Collects output files of one task under a common path prefix."""

    def __init__(self, cfg: ExperimentConfig, out_dir: Path | None):
        prefix = Path(cfg.output)
        if out_dir is not None:
            prefix = out_dir / prefix.name if prefix.is_absolute() else out_dir / prefix
        prefix.parent.mkdir(parents=True, exist_ok=True)
        self.prefix = prefix
        self.files: list[Path] = []

    def path(self, suffix: str) -> Path:
        return self.prefix.parent / f"{self.prefix.name}_{suffix}"

    def json(self, suffix: str, obj) -> Path:
        p = io.write_json(self.path(suffix), obj)
        self.files.append(p)
        return p

    def text(self, suffix: str, text: str) -> Path:
        p = io.write_text(self.path(suffix), text)
        self.files.append(p)
        return p

    def pulse(self, suffix: str, pulses, params: SystemParams) -> Path:
        p = io.write_pulse_csv(self.path(suffix), pulses, params.times())
        self.files.append(p)
        return p


def _read_pulse(cfg: ExperimentConfig, path: str, key: str, params: SystemParams):
    """Load a pulse CSV and adopt its time grid (T, n_steps) into ``params``."""
    file = cfg.resolve(path)
    if not file.is_file():
        raise ConfigError(key, f"pulse file {str(file)!r} not found")
    try:
        pulses, times = io.read_pulse_csv(file)
        T, n_steps = io.grid_from_times(times)
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from exc
    if (T, n_steps) != (params.total_time, params.n_steps):
        log.warning("using the pulse file grid T = %g us, n_steps = %d", T, n_steps)
        params = params.replace(total_time=T, n_steps=n_steps)
    return pulses, params


def _optimize_one(params, control, scenario, m):
    search = control.search(scenario)
    opt = optimize_discrete if search.discrete else optimize_map
    res = opt(m, control.N, params, search)
    problems = res.pulses.violations()
    if problems:
        raise TaskError(f"optimised pulse violates constraints: {problems}")
    return res


def task_optimize(cfg: ExperimentConfig, run: Run) -> dict:
    params = cfg.system.params()
    combos = [(s, m) for s in cfg.control.scenarios() for m in cfg.control.m_values()]
    summary = []
    for scenario, m in combos:
        tag = "" if len(combos) == 1 else f"{scenario}_m{m}_"
        res = _optimize_one(params, cfg.control, scenario, m)
        run.json(f"{tag}result.json", {"scenario": scenario, "m": m, "N": cfg.control.N, **res.to_dict()})
        run.pulse(f"{tag}pulse.csv", res.pulses, params)
        run.text(f"{tag}populations.csv", res.report.to_csv())
        summary.append({"scenario": scenario, "m": m, "N": cfg.control.N, "F": res.F})
        log.info("%s m=%d N=%d: F = %.6f", scenario, m, cfg.control.N, res.F)
    return {"runs": summary}


def task_evaluate(cfg: ExperimentConfig, run: Run) -> dict:
    pulses, params = _read_pulse(cfg, cfg.pulse, "pulse", cfg.system.params())
    report = evaluate_pulse(pulses, cfg.control.m, cfg.control.N, params)
    run.text("report.json", report.to_json() + "\n")
    run.text("populations.csv", report.to_csv())
    return {"F": report.F}


def task_robustness(cfg: ExperimentConfig, run: Run) -> dict:
    params = cfg.system.params()
    m, N = cfg.control.m, cfg.control.N
    if cfg.pulse is not None:
        pulses, params = _read_pulse(cfg, cfg.pulse, "pulse", params)
    else:
        res = _optimize_one(params, cfg.control, cfg.control.scenario, m)
        pulses = res.pulses
        run.pulse("pulse.csv", pulses, params)
    xi = analysis.default_xi_grid(cfg.robustness.xi_half_width, cfg.robustness.points)
    curve = analysis.scan_calibration(pulses, params, m, N, xi)
    run.json("robustness.json", curve.to_dict())
    run.text("robustness.csv", curve.to_csv())
    return {"F0": curve.F0, "drop": curve.drop, "peak_to_peak": curve.peak_to_peak}


def task_poincare(cfg: ExperimentConfig, run: Run) -> dict:
    block = cfg.poincare
    try:
        t_opt = {int(k): float(v) for k, v in block.t_opt_us.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError("poincare.t_opt_us", "must map N to a duration in us") from exc
    rows = poincare.poincare_table(cfg.system.params(), block.N_values, block.eps, block.t_max_factor, t_opt)
    run.text("poincare.csv", poincare.rows_to_csv(rows))
    run.json("poincare.json", [r.__dict__ for r in rows])
    missing = [(r.N, r.m) for r in rows if not np.isfinite(r.T_F)]
    return {"rows": len(rows), "not_found": missing}


def task_qnd(cfg: ExperimentConfig, run: Run) -> dict:
    params = cfg.system.params()
    d = params.n_levels
    block = cfg.qnd
    m, mp = cfg.control.m, block.m_prime
    if not 0 <= mp < d:
        raise ConfigError("qnd.m_prime", f"level {mp} outside 0..{d - 1}")
    if block.channel is None:
        channel = qnd.PhononChannel.identity(d)
    else:
        file = cfg.resolve(block.channel)
        try:
            channel = qnd.PhononChannel.load(file)
        except (OSError, ValueError) as exc:
            raise ConfigError("qnd.channel", str(exc)) from exc
        if channel.dim != d:
            raise ConfigError("qnd.channel", f"acts on {channel.dim} levels, system has {d}")
    if block.maps == "ideal":
        maps = qnd.IdealMaps(d)
    else:
        pulses = {}
        for level in {m, mp}:
            key = str(level)
            if key not in block.pulses:
                raise ConfigError("qnd.pulses", f"no pulse CSV for level {level}")
            pulses[level], params_l = _read_pulse(cfg, block.pulses[key], f"qnd.pulses.{key}", params)
            if params_l != params:
                raise ConfigError(f"qnd.pulses.{key}", "pulse grid differs from the system block")
        maps = qnd.PropagatedMaps(params, pulses)
    rho = qnd.thermal_state(d, block.nbar)
    result = qnd.run_filter_sequence(rho, m, mp, channel, maps)
    closed = qnd.closed_form_probability(rho, m, mp, channel)
    out = {"m": m, "m_prime": mp, "P_f": result.P_f, "P_f_closed_form": closed,
           "protocol_error": abs(result.P_f - closed), "steps": result.steps}
    run.json("qnd.json", out)
    return {"P_f": result.P_f, "protocol_error": out["protocol_error"]}


def task_scaling(cfg: ExperimentConfig, run: Run) -> dict:
    params = cfg.system.params()
    rows = analysis.scaling_run(
        cfg.control.m, params.total_time, cfg.scaling.N_list, cfg.control.scenario,
        params, cfg.control.search(cfg.control.scenario),
    )
    run.text("scaling.csv", analysis.scaling_to_csv(rows))
    return {"rows": [{"N": r.N, "F": r.F} for r in rows]}


TASK_HANDLERS = {
    "optimize": task_optimize,
    "evaluate": task_evaluate,
    "robustness": task_robustness,
    "poincare": task_poincare,
    "qnd": task_qnd,
    "scaling": task_scaling,
}


def execute(cfg: ExperimentConfig, out_dir: Path | None = None) -> tuple[dict, Path]:
    """Run the configured task; returns (summary, manifest path). Raises on failure."""
    run = Run(cfg, out_dir)
    start = time.perf_counter()
    summary = TASK_HANDLERS[cfg.task](cfg, run)
    manifest = {
        "task": cfg.task,
        "config": cfg.to_dict(),
        "seed": cfg.control.seed,
        "versions": _versions(),
        "wall_time_s": time.perf_counter() - start,
        "summary": summary,
        "files": [{"path": p.name, "sha256": io.sha256_file(p)} for p in run.files],
    }
    path = io.write_json(run.path("manifest.json"), manifest)
    return summary, path


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phononmap", description="Phonon-selective spin mapping experiments")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="JSON experiment configuration")
    src.add_argument("--preset", choices=PRESETS, help="bundled configuration")
    r.add_argument("--out", type=Path, default=None, help="output directory")
    r.add_argument("--threads", type=int, default=None, help="override control.threads")
    r.add_argument("--seed", type=int, default=None, help="override control.seed")
    r.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("presets", help="list bundled configurations")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "presets":
        for name in PRESETS:
            print(name)
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else load_preset(args.preset)
        overrides = {}
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads", "must be >= 1")
            overrides["threads"] = args.threads
        if args.seed is not None:
            overrides["seed"] = args.seed
        if overrides:
            cfg.control = replace(cfg.control, **overrides)
    except (ConfigError, OSError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1
    try:
        summary, manifest = execute(cfg, args.out)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1
    except (PropagationError, TaskError, np.linalg.LinAlgError, ValueError, ArithmeticError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary))
    print(f"manifest: {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
