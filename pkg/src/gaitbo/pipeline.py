"""Three-phase learning schedule over the gain table.

Phase one tunes PD gains per gait in simulation, warm-starting later gaits
from their nearest finished neighbor. Phase two sweeps the tuned controller
over a command grid and hulls the converged points into a convex safe
region. Phase three learns small gain and offset corrections on the real
plant, constrained to keep the converged gait inside that region. A
benchmark compares any two tables on identical sweeps.

All randomness descends from one integer seed through named substreams, so
a whole run is reproducible artifact-for-artifact.
"""

from __future__ import annotations

import itertools
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .bo import BOResult, ConstraintSpec, optimize, write_run_log
from .domain import (
    Box,
    ControlParams,
    Correction,
    GaitParameter,
    SeedSpec,
    correction_from_vector,
    from_unit,
)
from .errors import BlackBoxError, ConfigurationError, SafeSetError
from .errors import DegenerateGeometryError
from .objective import ObjectiveConfig, converged_stats, evaluate_cost
from .plant import (
    PlantConfig,
    learning_profile,
    real_config,
    run_episode,
    sim_config,
    stepping_start,
)
from .safeset import SafePolyhedron, SweepResult, constraint_value, convex_hull, save_polyhedron, sweep_commands
from .scheduler import GainTable, apply_corrections, lookup, save_table

__all__ = [
    "PipelineConfig",
    "TableBenchmark",
    "BenchmarkReport",
    "desk_scale_config",
    "full_scale_config",
    "sim_budget",
    "real_budget",
    "gait_run_name",
    "baseline_table",
    "learn_sim",
    "extract_safe_set",
    "learn_real",
    "benchmark",
    "benchmark_to_json_dict",
    "save_benchmark",
    "run_full_pipeline",
]

logger = logging.getLogger(__name__)

_NODE_TOL = 1e-9

# seed substreams of the pipeline root
_STREAM_SIM1 = 1
_STREAM_SIM2 = 2
_STREAM_REAL = 3
_STREAM_SWEEP = 4
_STREAM_BENCH = 5
_STREAM_BASELINE = 6
# within one BO run's SeedSpec, episode noise lives on substream 9,
# keyed by evaluation index; streams 0 and 1 belong to the optimizer
_EPISODE_KEY = 9


def _axis_tuple(values, name: str) -> tuple:
    nodes = tuple(float(v) for v in values)
    if not nodes:
        raise ConfigurationError(f"{name} must not be empty")
    if any(b <= a for a, b in zip(nodes, nodes[1:])):
        raise ConfigurationError(f"{name} must be strictly increasing, got {nodes}")
    return nodes


def _on_axis(value: float, axis: tuple) -> bool:
    return any(abs(value - a) <= _NODE_TOL for a in axis)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a full run needs: gait sets, budgets, boxes, and seeds.

    The three gait sets must all sit on the gain-table grid spanned by the
    node axes. Sweep axes are independent of the table grid; lookups clamp,
    so the sweep may range wider than the trained nodes.
    """

    vx_nodes: tuple
    vy_nodes: tuple
    h_nodes: tuple
    p_sim1: tuple
    p_sim2: tuple
    p_real: tuple
    i1: int
    i2: int
    i3: int
    init_counts: tuple
    kp_bounds: tuple = (0.0, 3.0)
    kd_bounds: tuple = (0.0, 1.5)
    delta_k_fraction: float = 0.5
    delta_k_floor: float = 0.2
    delta_p_bound: float = 0.2
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    constraint: ConstraintSpec = field(default_factory=ConstraintSpec)
    sweep_vx: tuple = ()
    sweep_vy: tuple = ()
    sweep_h: tuple = ()
    shrink_factor: float = 0.9
    seed: int = 0
    desk_scale: bool = True

    def __post_init__(self):
        object.__setattr__(self, "vx_nodes", _axis_tuple(self.vx_nodes, "vx_nodes"))
        object.__setattr__(self, "vy_nodes", _axis_tuple(self.vy_nodes, "vy_nodes"))
        object.__setattr__(self, "h_nodes", _axis_tuple(self.h_nodes, "h_nodes"))
        if any(h <= 0.0 for h in self.h_nodes):
            raise ConfigurationError("h_nodes must be positive heights")
        object.__setattr__(self, "sweep_vx", _axis_tuple(self.sweep_vx, "sweep_vx"))
        object.__setattr__(self, "sweep_vy", _axis_tuple(self.sweep_vy, "sweep_vy"))
        object.__setattr__(self, "sweep_h", _axis_tuple(self.sweep_h, "sweep_h"))
        if any(h <= 0.0 for h in self.sweep_h):
            raise ConfigurationError("sweep_h must be positive heights")

        for name in ("p_sim1", "p_sim2", "p_real"):
            gaits = tuple(getattr(self, name))
            object.__setattr__(self, name, gaits)
            for g in gaits:
                if not isinstance(g, GaitParameter):
                    raise ConfigurationError(
                        f"{name} entries must be GaitParameter, got {g!r}")
                if not (_on_axis(g.vx, self.vx_nodes) and _on_axis(g.vy, self.vy_nodes)
                        and _on_axis(g.h, self.h_nodes)):
                    raise ConfigurationError(
                        f"{name} gait ({g.vx}, {g.vy}, {g.h}) is not a grid node")
        if not self.p_sim1:
            raise ConfigurationError("p_sim1 must contain at least one gait")
        seen = set()
        for g in self.p_sim1 + self.p_sim2:
            key = (g.vx, g.vy, g.h)
            if key in seen:
                raise ConfigurationError(f"gait {key} appears twice across p_sim1/p_sim2")
            seen.add(key)

        counts = tuple(int(c) for c in self.init_counts)
        if len(counts) != 3 or any(c < 1 for c in counts):
            raise ConfigurationError(
                f"init_counts must be three positive integers, got {self.init_counts}")
        object.__setattr__(self, "init_counts", counts)
        for budget, count, name in ((self.i1, counts[0], "i1"),
                                    (self.i2, counts[1], "i2"),
                                    (self.i3, counts[2], "i3")):
            if int(budget) < count:
                raise ConfigurationError(
                    f"{name}={budget} cannot cover its initial design of {count}")
        object.__setattr__(self, "i1", int(self.i1))
        object.__setattr__(self, "i2", int(self.i2))
        object.__setattr__(self, "i3", int(self.i3))

        for name in ("kp_bounds", "kd_bounds"):
            lo, hi = (float(v) for v in getattr(self, name))
            if not (0.0 <= lo < hi):
                raise ConfigurationError(f"{name} must satisfy 0 <= low < high")
            object.__setattr__(self, name, (lo, hi))
        if self.delta_k_fraction < 0.0:
            raise ConfigurationError("delta_k_fraction must be nonnegative")
        if self.delta_k_floor <= 0.0 or self.delta_p_bound <= 0.0:
            raise ConfigurationError("correction bounds must be positive")
        if not (0.0 < self.shrink_factor <= 1.0):
            raise ConfigurationError(
                f"shrink_factor must lie in (0, 1], got {self.shrink_factor}")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def gain_box(self) -> Box:
        """The 6-D search box: kP on the first three axes, kD on the rest."""
        kp_lo, kp_hi = self.kp_bounds
        kd_lo, kd_hi = self.kd_bounds
        return Box([kp_lo] * 3 + [kd_lo] * 3, [kp_hi] * 3 + [kd_hi] * 3)

    def correction_box(self, incumbent: ControlParams) -> Box:
        """Correction bounds around an incumbent: a fraction of each gain
        with a fixed floor, and a flat band for the command offsets."""
        spans = [
            max(self.delta_k_fraction * incumbent.kP[0], self.delta_k_floor),
            max(self.delta_k_fraction * incumbent.kD[0], self.delta_k_floor),
            max(self.delta_k_fraction * incumbent.kP[1], self.delta_k_floor),
            max(self.delta_k_fraction * incumbent.kD[1], self.delta_k_floor),
            self.delta_p_bound,
            self.delta_p_bound,
        ]
        spans = np.array(spans)
        return Box(-spans, spans)

    def sweep_grid(self) -> tuple:
        return tuple(
            GaitParameter(vx, vy, h)
            for vx in self.sweep_vx for vy in self.sweep_vy for h in self.sweep_h
        )

    def root_seed(self) -> SeedSpec:
        return SeedSpec(self.seed)


def desk_scale_config(seed: int = 0) -> PipelineConfig:
    """A configuration small enough to run end to end in minutes."""
    step = [GaitParameter(0.0, 0.0, 1.0), GaitParameter(0.0, 0.0, 0.8)]
    walk = [GaitParameter(0.4, 0.0, 1.0), GaitParameter(-0.4, 0.0, 1.0),
            GaitParameter(0.4, 0.0, 0.8), GaitParameter(-0.4, 0.0, 0.8)]
    return PipelineConfig(
        vx_nodes=(-0.4, 0.0, 0.4),
        vy_nodes=(0.0,),
        h_nodes=(0.8, 1.0),
        p_sim1=tuple(step),
        p_sim2=tuple(walk),
        p_real=tuple(step),
        i1=40, i2=15, i3=10,
        init_counts=(8, 5, 3),
        sweep_vx=tuple(np.round(np.arange(-1.2, 1.2 + 1e-9, 0.4), 10)),
        sweep_vy=tuple(np.round(np.arange(-0.4, 0.4 + 1e-9, 0.2), 10)),
        sweep_h=(0.7, 0.8, 0.9, 1.0),
        seed=seed,
        desk_scale=True,
    )


def full_scale_config(seed: int = 0) -> PipelineConfig:
    """The full-size schedule: 308 grid nodes, 8000 simulated episodes."""
    vx = tuple(np.round(np.arange(-1.0, 1.0 + 1e-9, 0.2), 10))
    vy = tuple(np.round(np.arange(-0.3, 0.3 + 1e-9, 0.1), 10))
    h = (0.7, 0.8, 0.9, 1.0)
    p_sim1 = tuple(GaitParameter(0.0, 0.0, hh) for hh in (1.0, 0.9, 0.8, 0.7))
    nominal = {(g.vx, g.vy, g.h) for g in p_sim1}
    p_sim2 = tuple(
        GaitParameter(a, b, c)
        for a in vx for b in vy for c in h
        if (a, b, c) not in nominal
    )
    p_real = (GaitParameter(0.0, 0.0, 1.0), GaitParameter(0.0, 0.0, 0.9),
              GaitParameter(0.0, 0.0, 0.8))
    return PipelineConfig(
        vx_nodes=vx, vy_nodes=vy, h_nodes=h,
        p_sim1=p_sim1, p_sim2=p_sim2, p_real=p_real,
        i1=100, i2=25, i3=10,
        init_counts=(10, 5, 3),
        sweep_vx=tuple(np.round(np.arange(-1.2, 1.2 + 1e-9, 0.2), 10)),
        sweep_vy=tuple(np.round(np.arange(-0.4, 0.4 + 1e-9, 0.1), 10)),
        sweep_h=tuple(np.round(np.arange(0.65, 1.05 + 1e-9, 0.05), 10)),
        seed=seed,
        desk_scale=False,
    )


def sim_budget(cfg: PipelineConfig) -> int:
    """Total simulated episodes the two simulation phases will consume."""
    return len(cfg.p_sim1) * cfg.i1 + len(cfg.p_sim2) * cfg.i2


def real_budget(cfg: PipelineConfig) -> int:
    """Total real-plant episodes the correction phase will consume."""
    return len(cfg.p_real) * cfg.i3


def gait_run_name(gait: GaitParameter) -> str:
    """Directory name of one gait's run log, stable across runs."""
    return f"vx{gait.vx:g}_vy{gait.vy:g}_h{gait.h:g}"


def _write_log(result: BOResult, out_dir, phase: str, gait: GaitParameter) -> None:
    if out_dir is None:
        return
    run_dir = os.path.join(out_dir, "runs", phase, gait_run_name(gait))
    os.makedirs(run_dir, exist_ok=True)
    write_run_log(result, os.path.join(run_dir, "log.json"))


def _gain_black_box(gait: GaitParameter, cfg: PipelineConfig, plant: PlantConfig,
                    run_seed: SeedSpec):
    """Evaluate one 6-vector of gains by running a learning episode."""
    profile = learning_profile(gait)
    start = stepping_start(gait)
    counter = itertools.count()

    def black_box(x):
        idx = next(counter)
        table = GainTable.constant(ControlParams(x[:3], x[3:6], np.zeros(3)))
        traj = run_episode(plant, table, profile, start,
                           run_seed.derive(_EPISODE_KEY, idx))
        return evaluate_cost(traj, gait, cfg.objective), None, traj.fell

    return black_box


def _run_gain_bo(gait: GaitParameter, cfg: PipelineConfig, plant: PlantConfig,
                 run_seed: SeedSpec, iterations: int, init_count: int,
                 incumbent: ControlParams | None) -> BOResult:
    box = cfg.gain_box
    black_box = _gain_black_box(gait, cfg, plant, run_seed)
    design = None
    if incumbent is not None:
        rng = run_seed.generator(0)
        design = [np.concatenate([incumbent.kP, incumbent.kD])]
        design += [from_unit(rng.random(6), box) for _ in range(init_count - 1)]
    try:
        return optimize(black_box, box, iterations, init_count,
                        initial_design=design, seed=run_seed)
    except BlackBoxError as exc:
        raise BlackBoxError(
            f"gain learning failed at gait ({gait.vx}, {gait.vy}, {gait.h}): {exc}",
            exc.history) from exc


def _best_params(result: BOResult, box: Box) -> ControlParams:
    x = from_unit(result.best_x, box)
    return ControlParams(x[:3], x[3:6], np.zeros(3))


def _nearest(gait: GaitParameter, completed: list) -> tuple:
    """Closest finished gait and its optimum; earliest finish breaks ties."""
    best = None
    for other, params in completed:
        d = float(np.linalg.norm(gait.as_array() - other.as_array()))
        if best is None or d < best[0]:
            best = (d, other, params)
    return best


def _fill_table(cfg: PipelineConfig, visited: dict) -> GainTable:
    """Assemble the full grid from per-gait optima.

    Nodes never visited are interpolated from the visited ones when those
    form a complete sub-grid; otherwise each copies its nearest visited node.
    """
    sub_vx = sorted({k[0] for k in visited})
    sub_vy = sorted({k[1] for k in visited})
    sub_h = sorted({k[2] for k in visited})
    complete = len(visited) == len(sub_vx) * len(sub_vy) * len(sub_h) and all(
        (a, b, c) in visited for a in sub_vx for b in sub_vy for c in sub_h)

    aux = None
    if complete:
        values = np.zeros((len(sub_vx), len(sub_vy), len(sub_h), 9))
        for a, vx in enumerate(sub_vx):
            for b, vy in enumerate(sub_vy):
                for c, h in enumerate(sub_h):
                    values[a, b, c] = visited[(vx, vy, h)].as_vector()
        aux = GainTable(tuple(sub_vx), tuple(sub_vy), tuple(sub_h), values)

    keys = list(visited)
    values = np.zeros((len(cfg.vx_nodes), len(cfg.vy_nodes), len(cfg.h_nodes), 9))
    for a, vx in enumerate(cfg.vx_nodes):
        for b, vy in enumerate(cfg.vy_nodes):
            for c, h in enumerate(cfg.h_nodes):
                hit = next((k for k in keys
                            if abs(k[0] - vx) <= _NODE_TOL
                            and abs(k[1] - vy) <= _NODE_TOL
                            and abs(k[2] - h) <= _NODE_TOL), None)
                if hit is not None:
                    params = visited[hit]
                elif aux is not None:
                    params = lookup(aux, GaitParameter(vx, vy, h))
                else:
                    node = np.array([vx, vy, h])
                    nearest = min(keys, key=lambda k: float(
                        np.linalg.norm(np.array(k) - node)))
                    params = visited[nearest]
                values[a, b, c] = params.as_vector()
    return GainTable(cfg.vx_nodes, cfg.vy_nodes, cfg.h_nodes, values)


def learn_sim(cfg: PipelineConfig, out_dir=None, plant: PlantConfig | None = None,
              ) -> GainTable:
    """Tune gains for every listed gait in simulation and build the table.

    Nominal gaits run first with full budgets and random starts; the rest
    run in order of distance to the nearest finished gait, reusing its
    optimum as the first design point.
    """
    plant = sim_config() if plant is None else plant
    root = cfg.root_seed()
    box = cfg.gain_box
    completed: list = []
    visited: dict = {}

    for i, gait in enumerate(cfg.p_sim1):
        result = _run_gain_bo(gait, cfg, plant, root.derive(_STREAM_SIM1, i),
                              cfg.i1, cfg.init_counts[0], incumbent=None)
        params = _best_params(result, box)
        completed.append((gait, params))
        visited[(gait.vx, gait.vy, gait.h)] = params
        _write_log(result, out_dir, "sim1", gait)
        logger.info("sim1 %s: best cost %.6g", gait_run_name(gait), result.best_cost)

    remaining = list(enumerate(cfg.p_sim2))
    while remaining:
        ranked = []
        for orig_idx, gait in remaining:
            d, _, params = _nearest(gait, completed)
            ranked.append((d, orig_idx, gait, params))
        d, orig_idx, gait, incumbent = min(ranked, key=lambda r: (r[0], r[1]))
        remaining = [(i, g) for i, g in remaining if i != orig_idx]

        result = _run_gain_bo(gait, cfg, plant, root.derive(_STREAM_SIM2, orig_idx),
                              cfg.i2, cfg.init_counts[1], incumbent=incumbent)
        params = _best_params(result, box)
        completed.append((gait, params))
        visited[(gait.vx, gait.vy, gait.h)] = params
        _write_log(result, out_dir, "sim2", gait)
        logger.info("sim2 %s (dist %.3g): best cost %.6g",
                    gait_run_name(gait), d, result.best_cost)

    table = _fill_table(cfg, visited)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        save_table(table, os.path.join(out_dir, "gaintable_sim.json"))
    return table


def extract_safe_set(table: GainTable, cfg: PipelineConfig, out_dir=None,
                     jobs: int = 1) -> tuple[SweepResult, SafePolyhedron]:
    """Sweep the command grid through the tuned table and hull the survivors."""
    grid = cfg.sweep_grid()
    sweep = sweep_commands(table, sim_config(), grid, cfg.root_seed().derive(_STREAM_SWEEP),
                           segment_duration=cfg.objective.segment_duration, jobs=jobs)
    if len(sweep.safe_points) < 4:
        raise SafeSetError(
            f"only {len(sweep.safe_points)} safe points; a solid region needs 4")
    try:
        poly = convex_hull(sweep.safe_points, cfg.shrink_factor)
    except DegenerateGeometryError as exc:
        raise SafeSetError(f"safe points do not span a volume: {exc}") from exc
    logger.info("safe set: %d/%d commands feasible, %d hull vertices",
                len(sweep.feasible_commands), len(grid), poly.vertices.shape[0])
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        save_polyhedron(poly, os.path.join(out_dir, "safeset.json"))
    return sweep, poly


def _correction_black_box(gait: GaitParameter, table: GainTable,
                          poly: SafePolyhedron, cfg: PipelineConfig,
                          plant: PlantConfig, run_seed: SeedSpec):
    """Evaluate one free correction vector on the real plant.

    The constraint observation is the safe-region violation of the converged
    gait; falls report a fixed positive violation instead.
    """
    profile = learning_profile(gait)
    start = stepping_start(gait)
    counter = itertools.count()

    def black_box(c):
        idx = next(counter)
        corrected = apply_corrections(table, [(gait, correction_from_vector(c))])
        traj = run_episode(plant, corrected, profile, start,
                           run_seed.derive(_EPISODE_KEY, idx))
        cost = evaluate_cost(traj, gait, cfg.objective)
        if traj.fell:
            return cost, 0.5, True
        stats = converged_stats(traj, cfg.objective.segment_duration)
        return cost, constraint_value(poly, stats.p_c), False

    return black_box


def learn_real(table: GainTable, poly: SafePolyhedron, cfg: PipelineConfig,
               out_dir=None, plant: PlantConfig | None = None,
               ) -> tuple[GainTable, list]:
    """Learn per-gait corrections on the real plant inside the safe region.

    The zero correction is always evaluated first, so the returned table can
    never do worse than the uncorrected one under the same evaluation
    stream. Returns the corrected table and the (gait, correction) pairs.
    """
    plant = real_config() if plant is None else plant
    root = cfg.root_seed()
    corrections = []
    h_positive = 0
    h_total = 0

    for i, gait in enumerate(cfg.p_real):
        run_seed = root.derive(_STREAM_REAL, i)
        incumbent = lookup(table, gait)
        box = cfg.correction_box(incumbent)
        black_box = _correction_black_box(gait, table, poly, cfg, plant, run_seed)
        rng = run_seed.generator(0)
        design = [np.zeros(6)]
        design += [from_unit(rng.random(6), box)
                   for _ in range(cfg.init_counts[2] - 1)]
        try:
            result = optimize(black_box, box, cfg.i3, cfg.init_counts[2],
                              spec=cfg.constraint, initial_design=design,
                              seed=run_seed)
        except BlackBoxError as exc:
            raise BlackBoxError(
                f"correction learning failed at gait ({gait.vx}, {gait.vy}, "
                f"{gait.h}): {exc}", exc.history) from exc
        corr = correction_from_vector(from_unit(result.best_x, box))
        corrections.append((gait, corr))
        h_positive += sum(1 for ev in result.history
                          if ev.h_value is not None and ev.h_value > 0.0)
        h_total += len(result.history)
        _write_log(result, out_dir, "real", gait)
        logger.info("real %s: best cost %.6g (incumbent %.6g)",
                    gait_run_name(gait), result.best_cost, result.history[0].cost)

    if h_total:
        logger.info("real phase safety: %d/%d evaluations violated the safe "
                    "region (%.1f%%)", h_positive, h_total,
                    100.0 * h_positive / h_total)
    corrected = apply_corrections(table, corrections)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        save_table(corrected, os.path.join(out_dir, "gaintable_real.json"))
    return corrected, corrections


def baseline_table(cfg: PipelineConfig) -> GainTable:
    """A comparison table of random gains from the central half of the box.

    Seeded from the pipeline root, so the baseline is as reproducible as the
    learned tables.
    """
    box = cfg.gain_box
    rng = cfg.root_seed().derive(_STREAM_BASELINE).generator()
    lo = box.lower + 0.25 * box.widths
    shape = (len(cfg.vx_nodes), len(cfg.vy_nodes), len(cfg.h_nodes))
    values = np.zeros(shape + (9,))
    for a in range(shape[0]):
        for b in range(shape[1]):
            for c in range(shape[2]):
                gains = lo + 0.5 * box.widths * rng.random(6)
                values[a, b, c, :6] = gains
    return GainTable(cfg.vx_nodes, cfg.vy_nodes, cfg.h_nodes, values)


@dataclass(frozen=True)
class TableBenchmark:
    """One table's sweep outcome: counts and componentwise error means."""

    label: str
    feasible_count: int
    mean_abs_error: tuple | None
    mean_oscillation: tuple | None

    def __post_init__(self):
        if self.feasible_count < 0:
            raise ValueError("feasible_count must be nonnegative")
        for name in ("mean_abs_error", "mean_oscillation"):
            v = getattr(self, name)
            if v is not None:
                v = tuple(float(c) for c in v)
                if len(v) != 3 or any(c < 0.0 for c in v):
                    raise ValueError(f"{name} must be three nonnegative values")
                object.__setattr__(self, name, v)
        if (self.mean_abs_error is None) != (self.feasible_count == 0):
            raise ValueError("error means must be present exactly when runs succeeded")


@dataclass(frozen=True)
class BenchmarkReport:
    """Two tables swept over the same commands with the same noise streams."""

    grid_size: int
    table_a: TableBenchmark
    table_b: TableBenchmark
    feasible_winner: str
    tracking_winner: str

    def __post_init__(self):
        if self.table_a.feasible_count > self.grid_size:
            raise ValueError("table_a feasible count exceeds the grid")
        if self.table_b.feasible_count > self.grid_size:
            raise ValueError("table_b feasible count exceeds the grid")


def _table_stats(label: str, sweep: SweepResult) -> TableBenchmark:
    if not sweep.feasible_commands:
        return TableBenchmark(label, 0, None, None)
    errs = []
    oscs = []
    for cmd, st in zip(sweep.feasible_commands, sweep.stats):
        errs.append(np.abs(st.p_c.as_array() - cmd.as_array()))
        oscs.append(st.p_c_max.as_array() - st.p_c_min.as_array())
    return TableBenchmark(
        label,
        len(sweep.feasible_commands),
        tuple(np.mean(errs, axis=0)),
        tuple(np.mean(oscs, axis=0)),
    )


def _winner(a: TableBenchmark, b: TableBenchmark, key) -> str:
    va, vb = key(a), key(b)
    if va == vb:
        return "tie"
    return a.label if va > vb else b.label


def benchmark(table_a: GainTable, table_b: GainTable, cfg: PipelineConfig,
              plant: PlantConfig, out_dir=None, jobs: int = 1,
              labels: tuple = ("tuned", "baseline")) -> BenchmarkReport:
    """Sweep both tables over the command grid with identical noise streams."""
    grid = cfg.sweep_grid()
    seed = cfg.root_seed().derive(_STREAM_BENCH)
    sweep_a = sweep_commands(table_a, plant, grid, seed,
                             segment_duration=cfg.objective.segment_duration, jobs=jobs)
    sweep_b = sweep_commands(table_b, plant, grid, seed,
                             segment_duration=cfg.objective.segment_duration, jobs=jobs)
    stats_a = _table_stats(labels[0], sweep_a)
    stats_b = _table_stats(labels[1], sweep_b)

    def tracking_score(t: TableBenchmark) -> float:
        # lower mean error wins; an empty sweep always loses
        if t.mean_abs_error is None:
            return -np.inf
        return -float(np.mean(t.mean_abs_error))

    report = BenchmarkReport(
        grid_size=len(grid),
        table_a=stats_a,
        table_b=stats_b,
        feasible_winner=_winner(stats_a, stats_b, lambda t: t.feasible_count),
        tracking_winner=_winner(stats_a, stats_b, tracking_score),
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        save_benchmark(report, os.path.join(out_dir, "benchmark.json"))
    return report


def _table_to_dict(t: TableBenchmark) -> dict:
    return {
        "label": t.label,
        "feasible_count": t.feasible_count,
        "mean_abs_error": None if t.mean_abs_error is None else list(t.mean_abs_error),
        "mean_oscillation": (None if t.mean_oscillation is None
                             else list(t.mean_oscillation)),
    }


def benchmark_to_json_dict(report: BenchmarkReport) -> dict:
    return {
        "grid_size": report.grid_size,
        "table_a": _table_to_dict(report.table_a),
        "table_b": _table_to_dict(report.table_b),
        "summary": {
            "feasible_winner": report.feasible_winner,
            "tracking_winner": report.tracking_winner,
        },
    }


def save_benchmark(report: BenchmarkReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(benchmark_to_json_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_full_pipeline(cfg: PipelineConfig, out_dir, jobs: int = 1) -> dict:
    """All four phases in order, artifacts written under out_dir.

    Returns the artifact paths keyed by name.
    """
    os.makedirs(out_dir, exist_ok=True)
    table_sim = learn_sim(cfg, out_dir=out_dir)
    _, poly = extract_safe_set(table_sim, cfg, out_dir=out_dir, jobs=jobs)
    table_real, _ = learn_real(table_sim, poly, cfg, out_dir=out_dir)
    benchmark(table_real, baseline_table(cfg), cfg, real_config(),
              out_dir=out_dir, jobs=jobs)
    return {
        "gaintable_sim": os.path.join(out_dir, "gaintable_sim.json"),
        "safeset": os.path.join(out_dir, "safeset.json"),
        "gaintable_real": os.path.join(out_dir, "gaintable_real.json"),
        "benchmark": os.path.join(out_dir, "benchmark.json"),
    }
