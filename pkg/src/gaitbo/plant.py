"""Surrogate gait-parameter plant: PD regulator, first-order dynamics, episodes.

The plant state is the observed gait parameter (forward speed, lateral speed,
walking height), its per-step rate, and a lagged internal command. One step:

    u'    = (1 - beta) * u + beta * dg
    v'    = a * v + B @ u' + D @ p_desired + d0 + w,   w ~ N(0, diag(noise_std^2))
    p'    = p + v'

A run falls when any tracking-error component exceeds fall_band_width for
three consecutive steps, or the height drops below min_height.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .domain import ControlParams, GaitParameter, SeedSpec
from .errors import ConfigurationError, SimulationError

__all__ = [
    "PlantConfig",
    "PlantState",
    "CommandProfile",
    "Trajectory",
    "sim_config",
    "real_config",
    "disturbance_free",
    "regulator_output",
    "step",
    "run_episode",
    "learning_profile",
    "stepping_start",
    "write_csv",
    "EPISODE_DURATION",
    "COMMAND_SWITCH_TIME",
]

# Canonical timing of a learning or sweep episode: hold a matched command for
# 8 s, switch to the evaluated command, and run to 20 s total (50 steps).
EPISODE_DURATION = 20.0
COMMAND_SWITCH_TIME = 8.0

_ZERO3 = np.zeros(3)


def _vector3(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def _matrix3(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (3, 3):
        raise ValueError(f"{name} must have shape (3, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PlantConfig:
    """Dynamics constants for one plant variant."""

    B: np.ndarray
    a: np.ndarray
    beta: float
    D: np.ndarray
    d0: np.ndarray
    noise_std: np.ndarray
    dt: float = 0.4
    fall_band_width: float = 2.0
    min_height: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "B", _matrix3(self.B, "B"))
        object.__setattr__(self, "a", _vector3(self.a, "a"))
        object.__setattr__(self, "D", _matrix3(self.D, "D"))
        object.__setattr__(self, "d0", _vector3(self.d0, "d0"))
        object.__setattr__(self, "noise_std", _vector3(self.noise_std, "noise_std"))
        if np.any(np.diag(self.B) <= 0.0):
            raise ValueError("B must have positive diagonal entries")
        if np.any(np.abs(self.a) >= 1.0):
            raise ValueError("rate decay a must satisfy |a_i| < 1")
        if not (0.0 < self.beta <= 1.0):
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if np.any(self.noise_std < 0.0):
            raise ValueError("noise_std must be nonnegative")
        if self.fall_band_width <= 0.0:
            raise ValueError("fall_band_width must be positive")
        if self.min_height <= 0.0:
            raise ValueError("min_height must be positive")


_B_SIM = np.array([
    [0.30, 0.03, 0.01],
    [0.03, 0.25, 0.01],
    [0.00, 0.00, 0.35],
])


def sim_config() -> PlantConfig:
    """The simulation-domain plant."""
    return PlantConfig(
        B=_B_SIM,
        a=(0.6, 0.6, 0.5),
        beta=1.0,
        D=np.diag([-0.05, -0.05, -0.02]),
        d0=(0.0, 0.0, -0.03),
        noise_std=(0.002, 0.002, 0.002),
    )


def real_config() -> PlantConfig:
    """The real-domain plant: weaker lagged actuation, stronger disturbances."""
    return PlantConfig(
        B=0.75 * _B_SIM + np.array([
            [0.00, 0.05, 0.00],
            [0.05, 0.00, 0.00],
            [0.00, 0.00, 0.00],
        ]),
        a=(0.6, 0.6, 0.5),
        beta=0.6,
        D=1.5 * np.diag([-0.05, -0.05, -0.02]),
        d0=(0.02, -0.01, -0.05),
        noise_std=(0.01, 0.01, 0.01),
    )


def disturbance_free(cfg: PlantConfig) -> PlantConfig:
    """The same plant with disturbances and noise removed."""
    return PlantConfig(
        B=cfg.B,
        a=cfg.a,
        beta=cfg.beta,
        D=np.zeros((3, 3)),
        d0=np.zeros(3),
        noise_std=np.zeros(3),
        dt=cfg.dt,
        fall_band_width=cfg.fall_band_width,
        min_height=cfg.min_height,
    )


@dataclass(frozen=True)
class PlantState:
    """Observed gait parameter, its per-step rate, and the lagged command."""

    p_hat: np.ndarray
    v_hat: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_hat", _vector3(self.p_hat, "p_hat"))
        object.__setattr__(self, "v_hat", _vector3(self.v_hat, "v_hat"))
        object.__setattr__(self, "u", _vector3(self.u, "u"))


@dataclass(frozen=True)
class CommandProfile:
    """A piecewise-constant command schedule.

    entries is a sequence of (start_time, command); start times must begin at
    0 and increase strictly. The last command holds until total_duration.
    """

    entries: tuple
    total_duration: float

    def __post_init__(self):
        entries = tuple((float(t), cmd) for t, cmd in self.entries)
        if not entries:
            raise ConfigurationError("command profile needs at least one entry")
        if entries[0][0] != 0.0:
            raise ConfigurationError(
                f"first command must start at t=0, got t={entries[0][0]}"
            )
        for (t0, _), (t1, _) in zip(entries, entries[1:]):
            if t1 <= t0:
                raise ConfigurationError(
                    f"command start times must increase strictly ({t0} then {t1})"
                )
        for _, cmd in entries:
            if not isinstance(cmd, GaitParameter):
                raise ConfigurationError(f"commands must be GaitParameter, got {cmd!r}")
        duration = float(self.total_duration)
        if duration < entries[-1][0]:
            raise ConfigurationError(
                f"total_duration {duration} ends before the last command at {entries[-1][0]}"
            )
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "total_duration", duration)

    def command_at(self, t: float) -> GaitParameter:
        """The command active at time t (the latest entry not after t)."""
        current = self.entries[0][1]
        for start, cmd in self.entries:
            if start <= t:
                current = cmd
            else:
                break
        return current


@dataclass(frozen=True)
class Trajectory:
    """A recorded episode: per-sample command, observed state, regulator output.

    Samples are uniformly spaced by dt. The regulator output stored with the
    final sample is computed at that state but never applied.
    """

    dt: float
    times: np.ndarray
    p_desired: np.ndarray
    p_hat: np.ndarray
    delta_g: np.ndarray
    fell: bool
    fall_time: float | None

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        if times.ndim != 1 or times.shape[0] == 0:
            raise ValueError("trajectory must hold at least one sample")
        n = times.shape[0]
        for name in ("p_desired", "p_hat", "delta_g"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (n, 3):
                raise ValueError(f"{name} must have shape ({n}, 3), got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if n > 1:
            gaps = np.diff(times)
            if not np.allclose(gaps, self.dt, rtol=0.0, atol=1e-9):
                raise ValueError("sample times must be uniformly spaced by dt")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return self.times.shape[0]


def regulator_output(
    params: ControlParams,
    p_desired: GaitParameter,
    p_dot_desired: np.ndarray,
    state: PlantState,
    dt: float,
) -> np.ndarray:
    """Componentwise PD law on the gait-parameter error.

    dg = kP * (p_desired + deltaP - p_hat) + kD * (p_dot_desired - v_hat / dt)

    v_hat is a per-step rate, so it is divided by dt to compare against the
    desired rate in units per second.
    """
    err = p_desired.as_array() + params.deltaP - state.p_hat
    rate_err = np.asarray(p_dot_desired, dtype=float) - state.v_hat / dt
    return params.kP * err + params.kD * rate_err


def step(
    state: PlantState,
    delta_g: np.ndarray,
    cfg: PlantConfig,
    p_desired: GaitParameter,
    rng: np.random.Generator,
    step_index: int | None = None,
) -> PlantState:
    """Advance the plant one step under the regulator output delta_g."""
    delta_g = np.asarray(delta_g, dtype=float)
    u_new = (1.0 - cfg.beta) * state.u + cfg.beta * delta_g
    w = rng.normal(0.0, cfg.noise_std)
    v_new = cfg.a * state.v_hat + cfg.B @ u_new + cfg.D @ p_desired.as_array() + cfg.d0 + w
    p_new = state.p_hat + v_new
    if not (np.all(np.isfinite(p_new)) and np.all(np.isfinite(v_new)) and np.all(np.isfinite(u_new))):
        raise SimulationError(
            f"plant state became non-finite at step {step_index}", step_index=step_index
        )
    return PlantState(p_new, v_new, u_new)


def run_episode(
    cfg: PlantConfig,
    table,
    profile: CommandProfile,
    initial: PlantState,
    seed: SeedSpec,
) -> Trajectory:
    """Run the closed loop over the profile, recording every sample.

    The gain table is queried at the active command each step. Episodes
    terminate early with fell=True when the fall predicate fires.
    """
    from .scheduler import lookup  # local import to avoid a module cycle

    n_float = profile.total_duration / cfg.dt
    n_steps = int(round(n_float))
    if abs(n_float - n_steps) > 1e-9 or n_steps < 1:
        raise ConfigurationError(
            f"profile duration {profile.total_duration} is not a positive multiple of dt={cfg.dt}"
        )

    rng = seed.generator()
    times = np.empty(n_steps + 1)
    p_des = np.empty((n_steps + 1, 3))
    p_hat = np.empty((n_steps + 1, 3))
    dg_all = np.empty((n_steps + 1, 3))
    fell = False
    fall_time: float | None = None
    consecutive = 0
    state = initial
    recorded = 0

    for i in range(n_steps + 1):
        t = i * cfg.dt
        cmd = profile.command_at(t)
        params = lookup(table, cmd)
        dg = regulator_output(params, cmd, _ZERO3, state, cfg.dt)
        times[i] = t
        p_des[i] = cmd.as_array()
        p_hat[i] = state.p_hat
        dg_all[i] = dg
        recorded = i + 1
        if i > 0:
            if np.any(np.abs(state.p_hat - cmd.as_array()) > cfg.fall_band_width):
                consecutive += 1
            else:
                consecutive = 0
            if state.p_hat[2] < cfg.min_height or consecutive >= 3:
                fell = True
                fall_time = t
                break
        if i < n_steps:
            state = step(state, dg, cfg, cmd, rng, step_index=i)

    return Trajectory(
        dt=cfg.dt,
        times=times[:recorded],
        p_desired=p_des[:recorded],
        p_hat=p_hat[:recorded],
        delta_g=dg_all[:recorded],
        fell=fell,
        fall_time=fall_time,
    )


def stepping_start(command: GaitParameter) -> PlantState:
    """Rest state stepping in place at the command's height."""
    return PlantState(np.array([0.0, 0.0, command.h]), np.zeros(3), np.zeros(3))


def learning_profile(command: GaitParameter) -> CommandProfile:
    """The canonical evaluation profile for one command.

    Stepping in place at the command's height for the first 8 s, then the
    command itself until 20 s.
    """
    if command.vx == 0.0 and command.vy == 0.0:
        entries = ((0.0, command),)
    else:
        start = GaitParameter(0.0, 0.0, command.h)
        entries = ((0.0, start), (COMMAND_SWITCH_TIME, command))
    return CommandProfile(entries, EPISODE_DURATION)


def write_csv(traj: Trajectory, path) -> None:
    """Write a trajectory as CSV: time, commanded gait, observed gait, output."""
    buf = io.StringIO()
    buf.write("t,vx_d,vy_d,h_d,vx,vy,h,dg1,dg2,dg3\n")
    for i in range(len(traj)):
        row = [traj.times[i], *traj.p_desired[i], *traj.p_hat[i], *traj.delta_g[i]]
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())
