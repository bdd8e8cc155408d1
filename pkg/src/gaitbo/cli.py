"""Command-line front end: config loading, phase commands, and simulate.

One JSON config file drives every subcommand; its keys mirror the pipeline
configuration field names. Command-line flags override file values, and the
file overrides desk-scale defaults, so an empty config is a runnable one.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

from .bo import ConstraintSpec
from .domain import GaitParameter, SeedSpec
from .errors import ConfigurationError, GaitBoError, GridNodeError, RangeError
from .objective import ObjectiveConfig, evaluate_cost
from .pipeline import (
    PipelineConfig,
    baseline_table,
    benchmark,
    desk_scale_config,
    extract_safe_set,
    learn_real,
    learn_sim,
    full_scale_config,
)
from .plant import (
    disturbance_free,
    learning_profile,
    real_config,
    run_episode,
    sim_config,
    stepping_start,
    write_csv,
)
from .safeset import load_polyhedron
from .scheduler import load_table

__all__ = ["CliConfig", "load_cli_config", "main"]

_PIPELINE_KEYS = {f.name for f in dataclasses.fields(PipelineConfig)}
_CLI_KEYS = {"scale", "output_dir", "jobs", "plant", "verbose"}
_GAIT_SETS = {"p_sim1", "p_sim2", "p_real"}
_AXIS_KEYS = {"vx_nodes", "vy_nodes", "h_nodes", "sweep_vx", "sweep_vy", "sweep_h"}


@dataclasses.dataclass(frozen=True)
class CliConfig:
    """A parsed pipeline configuration plus the artifact plumbing around it."""

    pipeline: PipelineConfig
    output_dir: str = "."
    jobs: int = 1
    plant: str | None = None
    verbose: bool = False

    def __post_init__(self):
        if self.jobs < 1:
            raise ConfigurationError(f"jobs must be at least 1, got {self.jobs}")
        if self.plant is not None and self.plant not in ("sim", "real"):
            raise ConfigurationError(
                f"plant must be 'sim' or 'real', got {self.plant!r}")


def _gait_list(values, name: str) -> tuple:
    gaits = []
    for entry in values:
        if not isinstance(entry, (list, tuple)) or len(entry) != 3:
            raise ConfigurationError(
                f"{name} entries must be [vx, vy, h] triples, got {entry!r}")
        gaits.append(GaitParameter(*(float(v) for v in entry)))
    return tuple(gaits)


def load_cli_config(path=None, seed=None, output_dir=None, jobs=None,
                    plant=None, verbose=False) -> CliConfig:
    """Merge defaults, the config file, and flag overrides, in that order."""
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigurationError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")

    unknown = set(data) - _PIPELINE_KEYS - _CLI_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")

    scale = data.pop("scale", "desk")
    if scale == "desk":
        base = desk_scale_config()
    elif scale == "full":
        base = full_scale_config()
    else:
        raise ConfigurationError(f"scale must be 'desk' or 'full', got {scale!r}")

    file_output_dir = data.pop("output_dir", None)
    file_jobs = data.pop("jobs", None)
    file_plant = data.pop("plant", None)
    file_verbose = bool(data.pop("verbose", False))

    merged = {f.name: getattr(base, f.name)
              for f in dataclasses.fields(PipelineConfig)}
    try:
        for key, value in data.items():
            if key in _GAIT_SETS:
                merged[key] = _gait_list(value, key)
            elif key in _AXIS_KEYS:
                merged[key] = tuple(float(v) for v in value)
            elif key == "objective":
                merged[key] = ObjectiveConfig(**value)
            elif key == "constraint":
                merged[key] = ConstraintSpec(**value)
            elif key == "init_counts":
                merged[key] = tuple(int(v) for v in value)
            elif key in ("kp_bounds", "kd_bounds"):
                merged[key] = tuple(float(v) for v in value)
            else:
                merged[key] = value
        if seed is not None:
            merged["seed"] = seed
        pipeline = PipelineConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid config: {exc}") from exc

    return CliConfig(
        pipeline=pipeline,
        output_dir=output_dir if output_dir is not None else (file_output_dir or "."),
        jobs=jobs if jobs is not None else int(file_jobs or 1),
        plant=plant if plant is not None else file_plant,
        verbose=verbose or file_verbose,
    )


def _plant_config(name: str):
    return sim_config() if name == "sim" else real_config()


def _table_path(cli: CliConfig, override, default_name: str) -> str:
    return override if override else os.path.join(cli.output_dir, default_name)


def _load_table_checked(path: str):
    if not os.path.exists(path):
        raise ConfigurationError(f"gain table not found: {path}")
    try:
        return load_table(path)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"gain table {path} is not valid JSON: {exc}") from exc


def _cmd_learn_sim(cli: CliConfig, args) -> int:
    table_path = os.path.join(cli.output_dir, "gaintable_sim.json")
    learn_sim(cli.pipeline, out_dir=cli.output_dir)
    print(f"wrote {table_path}")
    return 0


def _cmd_extract_safeset(cli: CliConfig, args) -> int:
    table = _load_table_checked(_table_path(cli, args.table, "gaintable_sim.json"))
    sweep, _ = extract_safe_set(table, cli.pipeline, out_dir=cli.output_dir,
                                jobs=cli.jobs)
    print(f"{len(sweep.feasible_commands)}/{len(sweep.grid)} commands feasible")
    print(f"wrote {os.path.join(cli.output_dir, 'safeset.json')}")
    return 0


def _cmd_learn_real(cli: CliConfig, args) -> int:
    table = _load_table_checked(_table_path(cli, args.table, "gaintable_sim.json"))
    safeset_path = args.safeset or os.path.join(cli.output_dir, "safeset.json")
    if not os.path.exists(safeset_path):
        raise ConfigurationError(f"safe set not found: {safeset_path}")
    poly = load_polyhedron(safeset_path)
    plant = _plant_config(cli.plant or "real")
    learn_real(table, poly, cli.pipeline, out_dir=cli.output_dir, plant=plant)
    print(f"wrote {os.path.join(cli.output_dir, 'gaintable_real.json')}")
    return 0


def _cmd_benchmark(cli: CliConfig, args) -> int:
    table = _load_table_checked(_table_path(cli, args.table, "gaintable_real.json"))
    if args.against:
        other = _load_table_checked(args.against)
        labels = ("tuned", os.path.basename(args.against))
    else:
        other = baseline_table(cli.pipeline)
        labels = ("tuned", "baseline")
    plant = _plant_config(cli.plant or "real")
    report = benchmark(table, other, cli.pipeline, plant, out_dir=cli.output_dir,
                       jobs=cli.jobs, labels=labels)
    print(f"{labels[0]}: {report.table_a.feasible_count}/{report.grid_size} feasible; "
          f"{labels[1]}: {report.table_b.feasible_count}/{report.grid_size}")
    print(f"wrote {os.path.join(cli.output_dir, 'benchmark.json')}")
    return 0


def _cmd_simulate(cli: CliConfig, args) -> int:
    table = _load_table_checked(args.table)
    command = GaitParameter(*args.command)
    plant = _plant_config(cli.plant or "sim")
    if args.disturbance_free:
        plant = disturbance_free(plant)
    seed = SeedSpec(cli.pipeline.seed)
    traj = run_episode(plant, table, learning_profile(command),
                       stepping_start(command), seed)
    out = args.out or os.path.join(cli.output_dir, "trajectory.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    write_csv(traj, out)
    cost = evaluate_cost(traj, command, cli.pipeline.objective)
    if traj.fell:
        print(f"fell at t={traj.fall_time:g}s")
    print(f"cost {cost:.6g}")
    print(f"wrote {out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaitbo",
        description="Learn, verify, and exercise gain-scheduled PD controllers "
                    "for gait tracking.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; keys mirror the "
                                        "pipeline configuration")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--output-dir", help="artifact directory (default .)")
        p.add_argument("--jobs", type=int, help="parallel sweep workers")
        p.add_argument("--verbose", action="store_true", help="log progress")

    p = sub.add_parser("learn-sim", help="tune gains per gait in simulation")
    common(p)

    p = sub.add_parser("extract-safeset", help="sweep commands and hull the safe set")
    common(p)
    p.add_argument("--table", help="gain table (default <output-dir>/gaintable_sim.json)")

    p = sub.add_parser("learn-real", help="learn corrections on the real plant")
    common(p)
    p.add_argument("--table", help="gain table (default <output-dir>/gaintable_sim.json)")
    p.add_argument("--safeset", help="safe set (default <output-dir>/safeset.json)")

    p = sub.add_parser("benchmark", help="sweep two tables over the same commands")
    common(p)
    p.add_argument("--table", help="tuned table (default <output-dir>/gaintable_real.json)")
    p.add_argument("--against", help="comparison table (default: random baseline)")
    p.add_argument("--plant", choices=("sim", "real"), help="plant to sweep on")

    p = sub.add_parser("simulate", help="run one episode and write its CSV")
    common(p)
    p.add_argument("--table", required=True, help="gain table to drive")
    p.add_argument("--command", required=True, nargs=3, type=float,
                   metavar=("VX", "VY", "H"), help="commanded gait")
    p.add_argument("--plant", choices=("sim", "real"),
                   help="plant to run on (default sim)")
    p.add_argument("--disturbance-free", action="store_true",
                   help="zero out drift, coupling, and noise")
    p.add_argument("--out", help="trajectory CSV path "
                                 "(default <output-dir>/trajectory.csv)")
    return parser


_HANDLERS = {
    "learn-sim": _cmd_learn_sim,
    "extract-safeset": _cmd_extract_safeset,
    "learn-real": _cmd_learn_real,
    "benchmark": _cmd_benchmark,
    "simulate": _cmd_simulate,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cli = load_cli_config(
            path=args.config,
            seed=args.seed,
            output_dir=args.output_dir,
            jobs=args.jobs,
            plant=getattr(args, "plant", None),
            verbose=args.verbose,
        )
        logging.basicConfig(
            level=logging.INFO if cli.verbose else logging.WARNING,
            format="%(message)s",
        )
        os.makedirs(cli.output_dir, exist_ok=True)
        return _HANDLERS[args.subcommand](cli, args)
    except (ConfigurationError, RangeError, GridNodeError) as exc:
        print(f"error: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    except GaitBoError as exc:
        print(f"error: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
