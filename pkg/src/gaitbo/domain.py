"""Core value types: gait parameters, controller gains, corrections, boxes, seeds.

Everything downstream (plant, scheduler, optimization) works in terms of these
types. They are frozen; arrays they carry are defensive copies marked read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RangeError

__all__ = [
    "GaitParameter",
    "ControlParams",
    "Correction",
    "Box",
    "SeedSpec",
    "apply_correction",
    "correction_from_vector",
]


def _readonly_vector(values, size: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (size,):
        raise ValueError(f"{name} must have shape ({size},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GaitParameter:
    """A commanded or observed gait point: forward speed, lateral speed, height."""

    vx: float
    vy: float
    h: float

    def __post_init__(self):
        for name in ("vx", "vy", "h"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"gait parameter {name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.h <= 0.0:
            raise ValueError(f"walking height must be positive, got {self.h}")

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.h])

    @classmethod
    def from_array(cls, arr) -> "GaitParameter":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (3,):
            raise ValueError(f"gait parameter array must have shape (3,), got {arr.shape}")
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class ControlParams:
    """Componentwise PD gains and a gait-command offset, one set per gait point.

    kP and kD act diagonally on the three gait components; deltaP shifts the
    commanded gait before the proportional error is formed.
    """

    kP: np.ndarray
    kD: np.ndarray
    deltaP: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kP", _readonly_vector(self.kP, 3, "kP"))
        object.__setattr__(self, "kD", _readonly_vector(self.kD, 3, "kD"))
        object.__setattr__(self, "deltaP", _readonly_vector(self.deltaP, 3, "deltaP"))
        if np.any(self.kP < 0.0):
            raise ValueError(f"kP must be nonnegative, got {self.kP}")
        if np.any(self.kD < 0.0):
            raise ValueError(f"kD must be nonnegative, got {self.kD}")

    def as_vector(self) -> np.ndarray:
        """Pack as the 9-vector [kP, kD, deltaP]."""
        return np.concatenate([self.kP, self.kD, self.deltaP])

    @classmethod
    def from_vector(cls, vec) -> "ControlParams":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (9,):
            raise ValueError(f"control vector must have shape (9,), got {vec.shape}")
        return cls(vec[0:3], vec[3:6], vec[6:9])

    @classmethod
    def zero(cls) -> "ControlParams":
        return cls(np.zeros(3), np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class Correction:
    """A learned adjustment to one gait point's controller.

    deltaK holds [dkP_vx, dkD_vx, dkP_vy, dkD_vy, 0, 0]: only the speed
    channels' gains may move, the height gains stay fixed. deltaP holds
    [dp_vx, dp_vy, 0]: the height offset likewise stays fixed.
    """

    deltaK: np.ndarray
    deltaP: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "deltaK", _readonly_vector(self.deltaK, 6, "deltaK"))
        object.__setattr__(self, "deltaP", _readonly_vector(self.deltaP, 3, "deltaP"))
        if self.deltaK[4] != 0.0 or self.deltaK[5] != 0.0:
            raise ValueError("height-channel gain corrections must be zero")
        if self.deltaP[2] != 0.0:
            raise ValueError("height offset correction must be zero")

    @classmethod
    def zero(cls) -> "Correction":
        return cls(np.zeros(6), np.zeros(3))


def correction_from_vector(free: np.ndarray) -> Correction:
    """Build a Correction from its 6 free components.

    Layout: [dkP_vx, dkD_vx, dkP_vy, dkD_vy, dp_vx, dp_vy].
    """
    free = np.asarray(free, dtype=float)
    if free.shape != (6,):
        raise ValueError(f"free correction vector must have shape (6,), got {free.shape}")
    delta_k = np.array([free[0], free[1], free[2], free[3], 0.0, 0.0])
    delta_p = np.array([free[4], free[5], 0.0])
    return Correction(delta_k, delta_p)


def apply_correction(params: ControlParams, corr: Correction) -> ControlParams:
    """Shift the speed-channel gains and offsets; clamp gains at zero.

    Height-channel entries are copied through untouched.
    """
    kp = np.array(params.kP)
    kd = np.array(params.kD)
    dp = np.array(params.deltaP)
    kp[0] = max(kp[0] + corr.deltaK[0], 0.0)
    kp[1] = max(kp[1] + corr.deltaK[2], 0.0)
    kd[0] = max(kd[0] + corr.deltaK[1], 0.0)
    kd[1] = max(kd[1] + corr.deltaK[3], 0.0)
    dp[0] = dp[0] + corr.deltaP[0]
    dp[1] = dp[1] + corr.deltaP[1]
    return ControlParams(kp, kd, dp)


@dataclass(frozen=True)
class Box:
    """An axis-aligned search box with an affine map to and from the unit cube."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float)
        upper = np.array(self.upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ValueError(
                f"box bounds must be 1-D with equal shapes, got {lower.shape} and {upper.shape}"
            )
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("box bounds must be finite")
        if not np.all(lower < upper):
            bad = int(np.argmin(upper - lower))
            raise ValueError(
                f"box lower bound must be strictly below upper bound, "
                f"component {bad}: [{lower[bad]}, {upper[bad]}]"
            )
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n_dims(self) -> int:
        return self.lower.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


def to_unit(x: np.ndarray, box: Box) -> np.ndarray:
    """Map a point inside the box onto the unit cube."""
    x = np.asarray(x, dtype=float)
    if x.shape != box.lower.shape:
        raise ValueError(f"point has shape {x.shape}, box is {box.n_dims}-dimensional")
    for i in range(box.n_dims):
        if not (box.lower[i] <= x[i] <= box.upper[i]):
            raise RangeError(
                f"component {i} = {x[i]} outside box [{box.lower[i]}, {box.upper[i]}]"
            )
    return (x - box.lower) / box.widths


def from_unit(u: np.ndarray, box: Box) -> np.ndarray:
    """Map a unit-cube point back into the box."""
    u = np.asarray(u, dtype=float)
    if u.shape != box.lower.shape:
        raise ValueError(f"point has shape {u.shape}, box is {box.n_dims}-dimensional")
    for i in range(box.n_dims):
        if not (0.0 <= u[i] <= 1.0):
            raise RangeError(f"component {i} = {u[i]} outside the unit interval")
    return box.lower + u * box.widths


@dataclass(frozen=True)
class SeedSpec:
    """A reproducible randomness source: a root seed plus a stream id.

    The same (seed, stream) pair always produces bit-identical draws.
    Substreams derived with the same keys are likewise stable, so every
    episode, optimization run, and sweep can own an independent stream.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")
        if not isinstance(self.stream, (int, np.integer)) or isinstance(self.stream, bool):
            raise ValueError(f"stream must be an integer, got {self.stream!r}")
        if self.seed < 0 or self.stream < 0:
            raise ValueError("seed and stream must be nonnegative")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "stream", int(self.stream))

    def _sequence(self, keys: tuple[int, ...]) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream, *keys))

    def generator(self, *keys: int) -> np.random.Generator:
        """A fresh generator for this stream, optionally sub-keyed."""
        return np.random.default_rng(self._sequence(keys))

    def derive(self, *keys: int) -> "SeedSpec":
        """A child SeedSpec whose stream id is derived from the given keys."""
        state = self._sequence(keys).generate_state(1, np.uint64)[0]
        return SeedSpec(self.seed, int(state))
