"""Gain scheduling: a dense lookup table over a 3-D gait-parameter grid.

Controller parameters live at grid nodes; queries between nodes are blended
trilinearly and queries outside the grid are clamped to the boundary. Axes
with a single node degenerate gracefully to constants along that axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .domain import ControlParams, Correction, GaitParameter, apply_correction
from .errors import ConfigurationError, GridNodeError

__all__ = [
    "GainTable",
    "lookup",
    "upsert",
    "apply_corrections",
    "table_to_json_dict",
    "table_from_json_dict",
    "save_table",
    "load_table",
]

_AXIS_NAMES = ("vx", "vy", "h")
_NODE_TOL = 1e-9


def _axis_nodes(values, name: str) -> tuple[float, ...]:
    nodes = tuple(float(v) for v in values)
    if not nodes:
        raise ValueError(f"axis {name} needs at least one node")
    if not all(np.isfinite(nodes)):
        raise ValueError(f"axis {name} nodes must be finite")
    for a, b in zip(nodes, nodes[1:]):
        if b <= a:
            raise ValueError(f"axis {name} nodes must increase strictly ({a} then {b})")
    return nodes


@dataclass(frozen=True)
class GainTable:
    """Controller parameters on a dense (vx, vy, h) grid.

    values has shape (n_vx, n_vy, n_h, 9); the trailing axis packs
    [kP, kD, deltaP] as in ControlParams.as_vector().
    """

    vx_nodes: tuple
    vy_nodes: tuple
    h_nodes: tuple
    values: np.ndarray

    def __post_init__(self):
        vx = _axis_nodes(self.vx_nodes, "vx")
        vy = _axis_nodes(self.vy_nodes, "vy")
        h = _axis_nodes(self.h_nodes, "h")
        values = np.array(self.values, dtype=float)
        expected = (len(vx), len(vy), len(h), 9)
        if values.shape != expected:
            raise ValueError(f"values must have shape {expected}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("table values must be finite")
        if np.any(values[..., 0:6] < 0.0):
            raise ValueError("table gains must be nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "vx_nodes", vx)
        object.__setattr__(self, "vy_nodes", vy)
        object.__setattr__(self, "h_nodes", h)
        object.__setattr__(self, "values", values)

    @property
    def axes(self) -> tuple[tuple, tuple, tuple]:
        return (self.vx_nodes, self.vy_nodes, self.h_nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.vx_nodes) * len(self.vy_nodes) * len(self.h_nodes)

    def node_params(self, i: int, j: int, k: int) -> ControlParams:
        return ControlParams.from_vector(self.values[i, j, k])

    def node_points(self):
        """All grid nodes as GaitParameter, vx-major then vy then h."""
        for vx in self.vx_nodes:
            for vy in self.vy_nodes:
                for h in self.h_nodes:
                    yield GaitParameter(vx, vy, h)

    @classmethod
    def filled(cls, vx_nodes, vy_nodes, h_nodes, params: ControlParams) -> "GainTable":
        """A table holding the same parameters at every node."""
        vx = _axis_nodes(vx_nodes, "vx")
        vy = _axis_nodes(vy_nodes, "vy")
        h = _axis_nodes(h_nodes, "h")
        values = np.tile(params.as_vector(), (len(vx), len(vy), len(h), 1))
        return cls(vx, vy, h, values)

    @classmethod
    def constant(cls, params: ControlParams) -> "GainTable":
        """A single-node table: the same parameters for every query."""
        return cls.filled((0.0,), (0.0,), (1.0,), params)


def _cell_weight(nodes: tuple, q: float) -> tuple[int, float]:
    """Lower node index and fractional weight for a clamped query on one axis."""
    if len(nodes) == 1:
        return 0, 0.0
    if q <= nodes[0]:
        return 0, 0.0
    if q >= nodes[-1]:
        return len(nodes) - 2, 1.0
    idx = int(np.searchsorted(nodes, q, side="right")) - 1
    x0, x1 = nodes[idx], nodes[idx + 1]
    return idx, (q - x0) / (x1 - x0)


def lookup(table: GainTable, p: GaitParameter) -> ControlParams:
    """Trilinear interpolation of node parameters, clamped outside the grid."""
    i, wx = _cell_weight(table.vx_nodes, p.vx)
    j, wy = _cell_weight(table.vy_nodes, p.vy)
    k, wz = _cell_weight(table.h_nodes, p.h)
    i1 = min(i + 1, len(table.vx_nodes) - 1)
    j1 = min(j + 1, len(table.vy_nodes) - 1)
    k1 = min(k + 1, len(table.h_nodes) - 1)
    v = table.values
    out = np.zeros(9)
    for ii, fx in ((i, 1.0 - wx), (i1, wx)):
        if fx == 0.0:
            continue
        for jj, fy in ((j, 1.0 - wy), (j1, wy)):
            if fy == 0.0:
                continue
            for kk, fz in ((k, 1.0 - wz), (k1, wz)):
                if fz == 0.0:
                    continue
                out += (fx * fy * fz) * v[ii, jj, kk]
    return ControlParams.from_vector(out)


def _node_index(nodes: tuple, q: float, axis: str) -> int:
    diffs = [abs(n - q) for n in nodes]
    idx = int(np.argmin(diffs))
    if diffs[idx] > _NODE_TOL:
        raise GridNodeError(
            f"{axis}={q} is not a grid node (nearest node is {axis}={nodes[idx]})"
        )
    return idx


def upsert(table: GainTable, p: GaitParameter, params: ControlParams) -> GainTable:
    """A new table with the node at p replaced. p must sit on the grid."""
    i = _node_index(table.vx_nodes, p.vx, "vx")
    j = _node_index(table.vy_nodes, p.vy, "vy")
    k = _node_index(table.h_nodes, p.h, "h")
    values = np.array(table.values)
    values[i, j, k] = params.as_vector()
    return GainTable(table.vx_nodes, table.vy_nodes, table.h_nodes, values)


def apply_corrections(table: GainTable, corrections) -> GainTable:
    """A new table with per-node corrections applied.

    corrections is an iterable of (GaitParameter, Correction); each gait
    parameter must sit on the grid.
    """
    out = table
    for p, corr in corrections:
        i = _node_index(out.vx_nodes, p.vx, "vx")
        j = _node_index(out.vy_nodes, p.vy, "vy")
        k = _node_index(out.h_nodes, p.h, "h")
        params = apply_correction(out.node_params(i, j, k), corr)
        out = upsert(out, p, params)
    return out


def table_to_json_dict(table: GainTable) -> dict:
    entries = []
    for i, vx in enumerate(table.vx_nodes):
        for j, vy in enumerate(table.vy_nodes):
            for k, h in enumerate(table.h_nodes):
                params = table.node_params(i, j, k)
                entries.append({
                    "p": [vx, vy, h],
                    "kP": [float(v) for v in params.kP],
                    "kD": [float(v) for v in params.kD],
                    "deltaP": [float(v) for v in params.deltaP],
                })
    return {
        "axes": {
            "vx": list(table.vx_nodes),
            "vy": list(table.vy_nodes),
            "h": list(table.h_nodes),
        },
        "entries": entries,
    }


def table_from_json_dict(data: dict) -> GainTable:
    try:
        axes = data["axes"]
        vx = _axis_nodes(axes["vx"], "vx")
        vy = _axis_nodes(axes["vy"], "vy")
        h = _axis_nodes(axes["h"], "h")
        entries = data["entries"]
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed gain table document: {exc}") from exc
    values = np.full((len(vx), len(vy), len(h), 9), np.nan)
    for entry in entries:
        try:
            p = entry["p"]
            vec = np.concatenate([
                np.asarray(entry["kP"], dtype=float),
                np.asarray(entry["kD"], dtype=float),
                np.asarray(entry["deltaP"], dtype=float),
            ])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed gain table entry: {entry!r}") from exc
        if vec.shape != (9,):
            raise ConfigurationError(f"gain table entry has wrong arity: {entry!r}")
        i = _node_index(vx, float(p[0]), "vx")
        j = _node_index(vy, float(p[1]), "vy")
        k = _node_index(h, float(p[2]), "h")
        if not np.any(np.isnan(values[i, j, k])):
            raise ConfigurationError(f"duplicate gain table entry at p={p}")
        values[i, j, k] = vec
    if np.any(np.isnan(values)):
        missing = int(np.isnan(values[..., 0]).sum())
        raise ConfigurationError(f"gain table document is incomplete: {missing} nodes missing")
    return GainTable(vx, vy, h, values)


def save_table(table: GainTable, path) -> None:
    with open(path, "w") as fh:
        json.dump(table_to_json_dict(table), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_table(path) -> GainTable:
    with open(path) as fh:
        return table_from_json_dict(json.load(fh))
