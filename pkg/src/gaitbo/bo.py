"""Bayesian optimization with expected improvement and a latent feasibility GP.

All internal search happens on the unit cube; callers supply a Box and the
black box is evaluated in original units. Proposals come from a seeded
candidate sweep followed by coordinate-descent refinement.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .domain import Box, SeedSpec, from_unit, to_unit
from .errors import BlackBoxError, ConfigurationError
from .gp import GPModel, adaptive_std_scale, default_hyper_grid, fit, fit_hyper, posterior_batch

__all__ = [
    "Evaluation",
    "ConstraintSpec",
    "BOResult",
    "expected_improvement",
    "feasibility_from_moments",
    "feasibility_probability",
    "propose",
    "optimize",
    "result_to_log_entries",
    "write_run_log",
]

logger = logging.getLogger(__name__)

N_CANDIDATES = 1024
REFINE_STEPS = 20
REFINE_STEP_SIZE = 0.05
HYPER_REFIT_PERIOD = 5

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Evaluation:
    """One black-box observation, with the query point in unit-cube coordinates."""

    x: np.ndarray
    cost: float
    h_value: float | None
    fell: bool

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.ndim != 1:
            raise ValueError(f"evaluation point must be 1-D, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("evaluation point must be finite")
        if not np.isfinite(self.cost):
            raise ValueError(f"evaluation cost must be finite, got {self.cost}")
        if self.h_value is not None and not np.isfinite(self.h_value):
            raise ValueError(f"constraint observation must be finite, got {self.h_value}")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "cost", float(self.cost))
        if self.h_value is not None:
            object.__setattr__(self, "h_value", float(self.h_value))
        object.__setattr__(self, "fell", bool(self.fell))


@dataclass(frozen=True)
class ConstraintSpec:
    """How to treat the latent constraint: tolerance on infeasibility risk."""

    tolerance: float = 0.05
    h_observations: bool = True

    def __post_init__(self):
        if not (0.0 < self.tolerance < 1.0):
            raise ValueError(f"tolerance must lie in (0, 1), got {self.tolerance}")


@dataclass(frozen=True)
class BOResult:
    """Outcome of a run: best observed point plus the full history."""

    best_x: np.ndarray
    best_cost: float
    history: tuple
    best_cost_trace: np.ndarray

    def __post_init__(self):
        best_x = np.array(self.best_x, dtype=float)
        best_x.setflags(write=False)
        trace = np.array(self.best_cost_trace, dtype=float)
        trace.setflags(write=False)
        object.__setattr__(self, "best_x", best_x)
        object.__setattr__(self, "best_cost_trace", trace)
        object.__setattr__(self, "history", tuple(self.history))
        if len(self.history) != trace.shape[0]:
            raise ValueError("trace length must match history length")
        if np.any(np.diff(trace) > 0.0):
            raise ValueError("best-cost trace must be nonincreasing")


def _phi(z):
    return np.exp(-0.5 * np.square(z)) / _SQRT_2PI


def _ei_values(means: np.ndarray, stds: np.ndarray, best: float) -> np.ndarray:
    """Vectorized expected improvement below best, minimization convention."""
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    improve = best - means
    out = np.maximum(improve, 0.0)
    positive = stds > 0.0
    if np.any(positive):
        z = improve[positive] / stds[positive]
        out[positive] = improve[positive] * ndtr(z) + stds[positive] * _phi(z)
    return out


def expected_improvement(mean: float, std: float, best: float) -> float:
    """Expected improvement of a Gaussian belief over the incumbent best.

    With zero predictive std this degenerates to max(best - mean, 0).
    """
    if std < 0.0:
        raise ValueError(f"std must be nonnegative, got {std}")
    return float(_ei_values(np.array([mean]), np.array([std]), best)[0])


def feasibility_from_moments(mean: float, std: float) -> float:
    """Probability that a Gaussian constraint belief lands at or below zero."""
    if std < 0.0:
        raise ValueError(f"std must be nonnegative, got {std}")
    if std == 0.0:
        return 1.0 if mean <= 0.0 else 0.0
    return float(ndtr((0.0 - mean) / std))


def feasibility_probability(h_model: GPModel, x) -> float:
    """Posterior probability that the latent constraint is satisfied at x."""
    mean, std = posterior_batch(h_model, np.atleast_2d(np.asarray(x, dtype=float)))
    return feasibility_from_moments(float(mean[0]), float(std[0]))


def _feasibility_values(h_model: GPModel, X: np.ndarray) -> np.ndarray:
    means, stds = posterior_batch(h_model, X)
    out = np.where(means <= 0.0, 1.0, 0.0)
    positive = stds > 0.0
    out[positive] = ndtr((0.0 - means[positive]) / stds[positive])
    return out


def _coordinate_refine(x0: np.ndarray, score_fn, n_steps: int = REFINE_STEPS,
                       step: float = REFINE_STEP_SIZE) -> np.ndarray:
    """Greedy coordinate-descent ascent of score_fn inside the unit cube.

    Each step sweeps every coordinate in both directions, keeping improving
    moves; a sweep without improvement halves the step size.
    """
    x = np.array(x0, dtype=float)
    best = float(score_fn(x))
    n = x.shape[0]
    for _ in range(n_steps):
        improved = False
        for d in range(n):
            for direction in (step, -step):
                cand = np.array(x)
                cand[d] = min(max(cand[d] + direction, 0.0), 1.0)
                if cand[d] == x[d]:
                    continue
                val = float(score_fn(cand))
                if val > best:
                    x, best = cand, val
                    improved = True
        if not improved:
            step *= 0.5
    return x


def propose(obj_model: GPModel, h_model: GPModel | None, spec: ConstraintSpec | None,
            best: float, rng: np.random.Generator) -> np.ndarray:
    """Pick the next unit-cube query point.

    Unconstrained: maximize expected improvement over a seeded candidate set,
    then refine by coordinate descent. Constrained: among candidates whose
    feasibility probability clears 1 - tolerance, maximize EI times that
    probability; if none clears it, fall back to the most likely feasible
    candidate.
    """
    n = obj_model.X.shape[1]
    cand = rng.random((N_CANDIDATES, n))
    ratio = adaptive_std_scale(obj_model, cand)
    means, stds = posterior_batch(obj_model, cand)
    ei = _ei_values(means, stds * ratio, best)

    if h_model is None or spec is None:
        x0 = cand[int(np.argmax(ei))]

        def score(x):
            m, s = posterior_batch(obj_model, x[None, :])
            return _ei_values(m, s * ratio, best)[0]

        return _coordinate_refine(x0, score)

    pf = _feasibility_values(h_model, cand)
    qualifies = pf >= 1.0 - spec.tolerance
    if not np.any(qualifies):
        logger.warning("no candidate clears the feasibility threshold; "
                       "falling back to the most plausibly feasible point")
        return np.array(cand[int(np.argmax(pf))])
    score = np.where(qualifies, ei * pf, -np.inf)
    return np.array(cand[int(np.argmax(score))])


def _parse_observation(raw) -> tuple[float, float | None, bool]:
    if isinstance(raw, (tuple, list)):
        if len(raw) == 3:
            cost, h, fell = raw
        elif len(raw) == 2:
            cost, h = raw
            fell = False
        else:
            raise BlackBoxError(f"black box returned a {len(raw)}-tuple; expected "
                                "(cost, h_value, fell)")
        return float(cost), (None if h is None else float(h)), bool(fell)
    return float(raw), None, False


def optimize(black_box, box: Box, iterations: int, init_count: int,
             spec: ConstraintSpec | None = None, initial_design=None,
             seed: SeedSpec = SeedSpec(0)) -> BOResult:
    """Run the full loop: initial design, then model-guided proposals.

    black_box maps an original-units point to (cost, h_value, fell); a bare
    cost is also accepted. iterations is the total evaluation budget
    including the initial design. The returned best is the best observed
    evaluation, never a model prediction.
    """
    if init_count < 1:
        raise ConfigurationError(f"init_count must be at least 1, got {init_count}")
    if iterations < init_count:
        raise ConfigurationError(
            f"iterations ({iterations}) must cover the initial design ({init_count})"
        )

    n = box.n_dims
    history: list[Evaluation] = []

    def evaluate(x_orig: np.ndarray) -> None:
        try:
            raw = black_box(np.array(x_orig))
            cost, h_value, fell = _parse_observation(raw)
        except BlackBoxError:
            raise
        except Exception as exc:
            err = BlackBoxError(f"black box failed at x={x_orig}: {exc}", tuple(history))
            raise err from exc
        if not np.isfinite(cost):
            raise BlackBoxError(f"black box returned non-finite cost at x={x_orig}",
                                tuple(history))
        history.append(Evaluation(to_unit(x_orig, box), cost, h_value, fell))

    if initial_design is not None:
        design = [np.asarray(x, dtype=float) for x in initial_design]
        if not design:
            raise ConfigurationError("initial design must not be empty when given")
        if len(design) > iterations:
            raise ConfigurationError(
                f"initial design has {len(design)} points, more than {iterations} iterations"
            )
        for x in design:
            to_unit(x, box)  # raises RangeError before anything is evaluated
    else:
        rng_init = seed.generator(0)
        design = [from_unit(rng_init.random(n), box) for _ in range(init_count)]
    for x in design:
        evaluate(x)

    grid = default_hyper_grid(n)
    obj_hyper = None
    h_hyper = None
    first_loop = len(history)
    for k in range(first_loop, iterations):
        U = np.array([ev.x for ev in history])
        costs = np.array([ev.cost for ev in history])
        refit = obj_hyper is None or (k - first_loop) % HYPER_REFIT_PERIOD == 0
        if refit:
            obj_hyper = fit_hyper(U, costs, grid)
        obj_model = fit(U, costs, obj_hyper)

        h_model = None
        if spec is not None and spec.h_observations:
            observed = [(ev.x, ev.h_value) for ev in history if ev.h_value is not None]
            if observed:
                Uh = np.array([x for x, _ in observed])
                hs = np.array([h for _, h in observed])
                if refit or h_hyper is None:
                    h_hyper = fit_hyper(Uh, hs, grid)
                h_model = fit(Uh, hs, h_hyper)

        best = float(costs.min())
        u = propose(obj_model, h_model, spec, best, seed.generator(1, k))
        evaluate(from_unit(u, box))

    costs = np.array([ev.cost for ev in history])
    best_idx = int(np.argmin(costs))
    return BOResult(
        best_x=history[best_idx].x,
        best_cost=float(costs[best_idx]),
        history=tuple(history),
        best_cost_trace=np.minimum.accumulate(costs),
    )


def result_to_log_entries(result: BOResult) -> list[dict]:
    """The run history as JSON-ready records."""
    entries = []
    for i, ev in enumerate(result.history):
        entries.append({
            "iter": i,
            "x": [float(v) for v in ev.x],
            "cost": float(ev.cost),
            "h": None if ev.h_value is None else float(ev.h_value),
            "fell": bool(ev.fell),
            "best": float(result.best_cost_trace[i]),
        })
    return entries


def write_run_log(result: BOResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(result_to_log_entries(result), fh, indent=2, sort_keys=True)
        fh.write("\n")
