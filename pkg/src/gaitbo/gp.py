"""Gaussian-process regression with a squared-exponential ARD kernel.

Targets are standardized before fitting; posteriors are mapped back to the
original scale. Factorization goes through a jittered Cholesky that retries
with doubled jitter before giving up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from .errors import NumericalError

__all__ = [
    "Hyperparams",
    "GPModel",
    "kernel",
    "kernel_matrix",
    "fit",
    "posterior",
    "posterior_batch",
    "log_marginal_likelihood",
    "fit_hyper",
    "default_hyper_grid",
    "adaptive_std_scale",
]

_JITTER_START = 1e-10
_JITTER_CAP = 1e-4
_STD_FLOOR = 1e-12

DEFAULT_LENGTHSCALES = (0.1, 0.2, 0.3, 0.5, 1.0)
DEFAULT_NOISE_STDS = (1e-3, 1e-2, 1e-1)


@dataclass(frozen=True)
class Hyperparams:
    """Kernel amplitude, per-dimension lengthscales, observation noise."""

    signal_std: float
    lengthscales: np.ndarray
    noise_std: float

    def __post_init__(self):
        ls = np.array(self.lengthscales, dtype=float)
        if ls.ndim != 1 or ls.size == 0:
            raise ValueError("lengthscales must be a nonempty 1-D array")
        if not np.all(np.isfinite(ls)) or np.any(ls <= 0.0):
            raise ValueError(f"lengthscales must be positive, got {ls}")
        if not np.isfinite(self.signal_std) or self.signal_std <= 0.0:
            raise ValueError(f"signal_std must be positive, got {self.signal_std}")
        if not np.isfinite(self.noise_std) or self.noise_std < 0.0:
            raise ValueError(f"noise_std must be nonnegative, got {self.noise_std}")
        ls.setflags(write=False)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_std", float(self.signal_std))
        object.__setattr__(self, "noise_std", float(self.noise_std))

    @property
    def n_dims(self) -> int:
        return self.lengthscales.shape[0]


def kernel(x1, x2, hyper: Hyperparams) -> float:
    """Squared-exponential covariance between two points."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != (hyper.n_dims,) or x2.shape != (hyper.n_dims,):
        raise ValueError(
            f"kernel inputs must have shape ({hyper.n_dims},), "
            f"got {x1.shape} and {x2.shape}"
        )
    z = (x1 - x2) / hyper.lengthscales
    return float(hyper.signal_std**2 * np.exp(-0.5 * np.dot(z, z)))


def kernel_matrix(X1: np.ndarray, X2: np.ndarray, hyper: Hyperparams) -> np.ndarray:
    """Covariance matrix between two point sets, shape (len(X1), len(X2))."""
    A = np.asarray(X1, dtype=float) / hyper.lengthscales
    B = np.asarray(X2, dtype=float) / hyper.lengthscales
    sq = (
        np.sum(A**2, axis=1)[:, None]
        + np.sum(B**2, axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    np.maximum(sq, 0.0, out=sq)
    return hyper.signal_std**2 * np.exp(-0.5 * sq)


@dataclass(frozen=True)
class GPModel:
    """A fitted GP: training data, factorization, and the target rescaling."""

    X: np.ndarray
    y: np.ndarray  # standardized targets
    hyper: Hyperparams
    L: np.ndarray  # lower Cholesky factor of K + (noise^2 + jitter) I
    alpha: np.ndarray
    y_mean: float
    y_scale: float
    jitter: float

    @property
    def n_points(self) -> int:
        return self.X.shape[0]

    @property
    def prior_std(self) -> float:
        """Prior standard deviation in original target units."""
        return self.hyper.signal_std * self.y_scale


def _as_training_inputs(X, n_dims: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"training inputs must be a nonempty 2-D array, got shape {X.shape}")
    if X.shape[1] != n_dims:
        raise ValueError(
            f"training inputs have {X.shape[1]} dims, lengthscales have {n_dims}"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("training inputs must be finite")
    return X


def fit(X, y, hyper: Hyperparams, standardize: bool = True) -> GPModel:
    """Fit a GP to (X, y) under fixed hyperparameters.

    With standardize=True (the default) targets are shifted to zero mean and,
    unless nearly constant, scaled to unit standard deviation; hyperparameters
    then refer to the standardized scale.
    """
    X = _as_training_inputs(X, hyper.n_dims)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"got {X.shape[0]} inputs but {y.shape[0]} targets")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")

    if standardize:
        y_mean = float(y.mean())
        sd = float(y.std())
        y_scale = sd if sd >= _STD_FLOOR else 1.0
    else:
        y_mean, y_scale = 0.0, 1.0
    ys = (y - y_mean) / y_scale

    K = kernel_matrix(X, X, hyper)
    sig2 = hyper.signal_std**2
    jitter = _JITTER_START * sig2
    cap = _JITTER_CAP * sig2
    L = None
    while True:
        try:
            L = cholesky(K + (hyper.noise_std**2 + jitter) * np.eye(X.shape[0]), lower=True)
            break
        except LinAlgError:
            jitter *= 2.0
            if jitter > cap:
                raise NumericalError(
                    f"covariance factorization failed even with jitter {jitter:.3e}"
                ) from None
    alpha = cho_solve((L, True), ys)
    X = np.array(X)
    X.setflags(write=False)
    for arr in (ys, L, alpha):
        arr.setflags(write=False)
    return GPModel(X=X, y=ys, hyper=hyper, L=L, alpha=alpha,
                   y_mean=y_mean, y_scale=y_scale, jitter=jitter)


def posterior_batch(model: GPModel, Xq) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and standard deviations at query points, original scale."""
    Xq = np.asarray(Xq, dtype=float)
    if Xq.ndim == 1:
        Xq = Xq[:, None]
    if Xq.shape[1] != model.hyper.n_dims:
        raise ValueError(
            f"query points have {Xq.shape[1]} dims, model has {model.hyper.n_dims}"
        )
    Ks = kernel_matrix(model.X, Xq, model.hyper)
    mean_s = Ks.T @ model.alpha
    V = solve_triangular(model.L, Ks, lower=True)
    var = model.hyper.signal_std**2 - np.sum(V**2, axis=0)
    np.maximum(var, 0.0, out=var)
    mean = mean_s * model.y_scale + model.y_mean
    std = np.sqrt(var) * model.y_scale
    return mean, std


def posterior(model: GPModel, x) -> tuple[float, float]:
    """Posterior mean and standard deviation at one point, original scale."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    mean, std = posterior_batch(model, x[None, :])
    return float(mean[0]), float(std[0])


def log_marginal_likelihood(model: GPModel) -> float:
    """Log evidence of the standardized targets under the fitted model."""
    m = model.n_points
    return float(
        -0.5 * model.y @ model.alpha
        - np.sum(np.log(np.diag(model.L)))
        - 0.5 * m * np.log(2.0 * np.pi)
    )


def default_hyper_grid(n_dims: int,
                       lengthscales=DEFAULT_LENGTHSCALES,
                       noise_stds=DEFAULT_NOISE_STDS,
                       signal_std: float = 1.0) -> list[Hyperparams]:
    """The search grid: one shared lengthscale per candidate, fixed amplitude.

    Targets are standardized at fit time, so a unit signal_std matches their
    scale and only the lengthscale and noise level need searching.
    """
    grid = []
    for ls in lengthscales:
        for ns in noise_stds:
            grid.append(Hyperparams(signal_std, np.full(n_dims, float(ls)), float(ns)))
    return grid


def fit_hyper(X, y, grid) -> Hyperparams:
    """Pick the grid hyperparameters with the highest log marginal likelihood.

    Exact ties go to the smallest lengthscale product so the choice is
    deterministic even for constant targets.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("hyperparameter grid must be nonempty")
    best: Hyperparams | None = None
    best_lml = -np.inf
    best_prod = np.inf
    failures = []
    for hyper in grid:
        try:
            lml = log_marginal_likelihood(fit(X, y, hyper))
        except NumericalError as exc:
            failures.append(exc)
            continue
        prod = float(np.prod(hyper.lengthscales))
        if lml > best_lml or (lml == best_lml and prod < best_prod):
            best, best_lml, best_prod = hyper, lml, prod
    if best is None:
        raise NumericalError(
            f"every hyperparameter candidate failed to factorize ({len(failures)} failures)"
        )
    return best


def adaptive_std_scale(model: GPModel, candidates) -> float:
    """Inflation factor keeping the acquisition exploratory late in a run.

    When the largest posterior std over the candidate set has collapsed below
    a tenth of the prior std, rescale it back up to that floor; otherwise
    leave the stds untouched.
    """
    _, stds = posterior_batch(model, candidates)
    if stds.size == 0:
        raise ValueError("candidate set must be nonempty")
    s_max = float(stds.max())
    floor = 0.1 * model.prior_std
    s_max = max(s_max, 1e-9 * floor)
    if s_max < floor:
        return floor / s_max
    return 1.0
