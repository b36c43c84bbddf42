"""Grid Bayesian inference of field parameters from shot counts.

The likelihood is the product over instants of binomial terms
``p_j^X_j (1 - p_j)^(N_p - X_j)``; the binomial coefficient is dropped since
it does not depend on the parameters.  ``p_j`` comes from any forward map,
either the exact simulator or a trained surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .grid import ParameterGrid
from .sampling import ObservationSet, simulate_observations

EPSILON = 1e-6


class PosteriorError(RuntimeError):
    pass


def clamp_curve(values, eps: float = EPSILON) -> np.ndarray:
    return np.clip(np.asarray(values, dtype=float), eps, 1.0 - eps)


def log_likelihood(obs: ObservationSet, curve, eps: float = EPSILON):
    """Binomial log-likelihood of ``obs`` under one curve or a stack of curves.

    ``curve`` may have shape (N_T,) or (n_nodes, N_T); the result is a float
    or an array of length n_nodes.
    """
    p = clamp_curve(curve, eps)
    if p.shape[-1] != obs.successes.size:
        raise ValueError(f"curve has {p.shape[-1]} points but observations have {obs.successes.size}")
    x = obs.successes.astype(float)
    fails = obs.n_p - x
    ll = np.log(p) @ x + np.log1p(-p) @ fails
    return float(ll) if np.ndim(ll) == 0 else ll


class FlatPrior:
    """Uniform prior over the grid box."""

    name = "flat"

    def log_density(self, nodes: np.ndarray) -> np.ndarray:
        return np.zeros(len(nodes))

    def describe(self) -> dict:
        return {"kind": self.name}


def evaluate_forward(forward, nodes: np.ndarray) -> np.ndarray:
    """Curves at every node, batched when the forward map supports it."""
    if hasattr(forward, "predict"):
        return np.asarray(forward.predict(nodes), dtype=float)
    if hasattr(forward, "curves"):
        return np.asarray(forward.curves(nodes), dtype=float)
    return np.stack([np.asarray(forward(n), dtype=float) for n in nodes])


@dataclass(frozen=True)
class PosteriorGrid:
    grid: ParameterGrid
    log_weights: np.ndarray
    probabilities: np.ndarray
    prior: dict = field(default_factory=lambda: {"kind": "flat"})

    def total_mass(self) -> float:
        return float(np.sum(self.probabilities * self.grid.trapezoid_weights()))

    def argmax(self) -> np.ndarray:
        idx = np.unravel_index(np.argmax(self.probabilities), self.grid.shape)
        return np.array([pts[i] for pts, i in zip(self.grid.points(), idx)])


@dataclass(frozen=True)
class EstimateSummary:
    mean: float
    std: float
    marginal: np.ndarray
    points: np.ndarray


def normalize_log_weights(grid: ParameterGrid, log_w: np.ndarray, prior: dict | None = None) -> PosteriorGrid:
    """Max-subtract, exponentiate and normalise to unit trapezoid mass."""
    log_w = np.asarray(log_w, dtype=float).reshape(grid.shape)
    if np.any(np.isnan(log_w)):
        raise PosteriorError("log-weights contain NaN")
    top = np.max(log_w)
    if not np.isfinite(top):
        raise PosteriorError("all posterior weights vanish; the data are incompatible with every node")
    shifted = log_w - top
    w = np.exp(shifted)
    mass = float(np.sum(w * grid.trapezoid_weights()))
    return PosteriorGrid(grid, shifted, w / mass, prior or {"kind": "flat"})


def posterior(obs: ObservationSet, forward, grid: ParameterGrid, prior=None, eps: float = EPSILON) -> PosteriorGrid:
    """Posterior over ``grid`` given shot counts ``obs`` and a forward map."""
    prior = prior or FlatPrior()
    nodes = grid.nodes()
    curves = evaluate_forward(forward, nodes)
    if curves.shape[0] != len(nodes):
        raise ValueError("forward map returned the wrong number of curves")
    log_w = log_likelihood(obs, curves, eps) + prior.log_density(nodes)
    return normalize_log_weights(grid, log_w, prior.describe())


def marginal(post: PosteriorGrid, dim: int) -> np.ndarray:
    """Marginal density along ``dim``, renormalised to unit trapezoid mass."""
    grid = post.grid
    if not 0 <= dim < grid.ndim:
        raise IndexError(f"dim {dim} out of range for a {grid.ndim}-D grid")
    dens = post.probabilities
    for d in reversed(range(grid.ndim)):
        if d == dim:
            continue
        a = grid.axes[d]
        dens = np.trapezoid(dens, dx=a.spacing, axis=d)
    axis = grid.axes[dim]
    return dens / np.trapezoid(dens, dx=axis.spacing)


def marginal_estimate(post: PosteriorGrid, dim: int = 0) -> EstimateSummary:
    """Posterior mean and standard deviation of parameter ``dim``."""
    m = marginal(post, dim)
    axis = post.grid.axes[dim]
    pts = axis.points
    mean = float(np.trapezoid(pts * m, dx=axis.spacing))
    var = float(np.trapezoid((pts - mean) ** 2 * m, dx=axis.spacing))
    return EstimateSummary(mean, float(np.sqrt(max(var, 0.0))), m, pts)


class GridBayesEstimator(BaseEstimator):
    """Posterior mean/std estimator on a fixed parameter grid.

    ``fit`` consumes an :class:`ObservationSet`; afterwards ``posterior_``
    holds the normalised grid posterior and ``mean_`` / ``std_`` the
    per-parameter marginal moments.
    """

    def __init__(self, forward=None, grid=None, prior=None, epsilon=EPSILON):
        self.forward = forward
        self.grid = grid
        self.prior = prior
        self.epsilon = epsilon

    def _grid(self):
        if self.grid is not None:
            return self.grid
        return ParameterGrid.uniform(getattr(self.forward, "n_params", 1))

    def fit(self, observations: ObservationSet, y=None):
        if self.forward is None:
            raise ValueError("a forward map is required")
        self.posterior_ = posterior(observations, self.forward, self._grid(), self.prior, self.epsilon)
        self.summaries_ = [marginal_estimate(self.posterior_, d) for d in range(self.posterior_.grid.ndim)]
        self.mean_ = np.array([s.mean for s in self.summaries_])
        self.std_ = np.array([s.std for s in self.summaries_])
        return self

    def predict(self, observations: ObservationSet | None = None) -> np.ndarray:
        """Posterior mean; refits first when new observations are given."""
        if observations is not None:
            self.fit(observations)
        check_is_fitted(self, "mean_")
        return self.mean_


@dataclass
class RepeatedEstimate:
    true_theta: tuple
    seeds: list
    means: np.ndarray  # (n_runs, M)
    stds: np.ndarray  # (n_runs, M)

    @property
    def mean_estimate(self) -> np.ndarray:
        return self.means.mean(axis=0)

    @property
    def mean_std(self) -> np.ndarray:
        return self.stds.mean(axis=0)


def repeated_estimation(
    true_forward,
    true_theta,
    inference_forward=None,
    n_runs: int = 10,
    seeds=None,
    n_p: int = 100,
    grid: ParameterGrid | None = None,
    prior=None,
) -> RepeatedEstimate:
    """Simulate ``n_runs`` independent acquisitions and estimate from each.

    Observations are always drawn from ``true_forward`` (the exact
    simulator); inference uses ``inference_forward`` (defaults to the same
    map).  Any failing run aborts the whole batch.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    seeds = list(range(n_runs)) if seeds is None else list(seeds)
    if len(seeds) != n_runs:
        raise ValueError("need one seed per run")
    est = GridBayesEstimator(inference_forward or true_forward, grid, prior)
    means, stds = [], []
    for s in seeds:
        obs = simulate_observations(true_forward, true_theta, n_p=n_p, seed=s)
        est.fit(obs)
        means.append(est.mean_.copy())
        stds.append(est.std_.copy())
    return RepeatedEstimate(
        tuple(float(v) for v in np.atleast_1d(true_theta)), seeds, np.array(means), np.array(stds)
    )
