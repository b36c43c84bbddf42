"""Shot-noise acquisition: calibration datasets and synthetic observations."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._random import derive_rng, sub_seed
from .grid import ParameterGrid

CALIBRATION_GRID_1D = ParameterGrid.uniform(1, 0.0, 0.5, 51)
CALIBRATION_GRID_2D = ParameterGrid.uniform(2, 0.0, 0.5, 51)


def sample_shots(p, n_m: int, rng: np.random.Generator):
    """Number of successes in ``n_m`` Bernoulli(p) trials.

    ``p`` may be a scalar or an array (one success count per entry).  Each
    trial is drawn individually, as in a shot-by-shot acquisition.
    """
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValueError("success probability must lie in [0, 1]")
    n_m = int(n_m)
    if n_m < 1:
        raise ValueError("n_m must be >= 1")
    draws = rng.random(p.shape + (n_m,))
    counts = np.count_nonzero(draws < p[..., None], axis=-1)
    return int(counts) if counts.ndim == 0 else counts


@dataclass
class CalibrationDataset:
    """Field values paired with shot-averaged curves.

    ``thetas`` has shape (n, M) and ``targets`` shape (n, N_T).  ``n_m=None``
    marks a noise-free dataset whose targets are the exact curves.
    """

    thetas: np.ndarray
    targets: np.ndarray
    times: np.ndarray
    grid: ParameterGrid
    n_m: int | None
    repetitions: int
    seed: int
    source: dict
    sub_seeds: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=float).reshape(len(self.targets), -1)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.sub_seeds is None:
            self.sub_seeds = np.zeros(len(self.targets), dtype=np.int64)

    def __len__(self):
        return len(self.targets)

    @property
    def n_params(self) -> int:
        return self.thetas.shape[1]

    def metadata(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "n_m": self.n_m,
            "repetitions": self.repetitions,
            "seed": self.seed,
            "source": self.source,
            "n_examples": len(self),
            "times": [float(t) for t in self.times],
            "sub_seeds": [int(s) for s in self.sub_seeds],
        }


@dataclass
class ObservationSet:
    """Success counts ``X_j`` out of ``n_p`` shots at each instant."""

    times: np.ndarray
    successes: np.ndarray
    n_p: int
    true_theta: tuple | None = None
    seed: int | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.successes = np.asarray(self.successes, dtype=np.int64)
        if self.successes.shape != self.times.shape:
            raise ValueError("need exactly one record per time instant")
        if self.n_p < 0 or np.any(self.successes < 0) or np.any(self.successes > self.n_p):
            raise ValueError("successes must satisfy 0 <= X_j <= n_p")

    @property
    def frequencies(self) -> np.ndarray:
        if self.n_p == 0:
            return np.full(self.times.shape, np.nan)
        return self.successes / self.n_p

    def metadata(self) -> dict:
        return {
            "n_p": self.n_p,
            "true_theta": None if self.true_theta is None else [float(v) for v in self.true_theta],
            "seed": self.seed,
            "n_times": int(self.times.size),
        }


def build_calibration_dataset(
    forward,
    grid: ParameterGrid = CALIBRATION_GRID_1D,
    n_m: int | None = 100,
    repetitions: int = 10,
    seed: int = 0,
    n_jobs: int = 1,
) -> CalibrationDataset:
    """Simulate the calibration stage over every grid node.

    ``forward`` maps a theta vector to the exact curve.  Each (node,
    repetition) pair draws fresh shots from its own derived RNG stream, so the
    output does not depend on evaluation order.  ``n_m=None`` gives
    noise-free targets and forces a single repetition.
    """
    if grid.ndim != getattr(forward, "n_params", grid.ndim):
        raise ValueError("grid dimension does not match the forward model")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if n_m is None:
        repetitions = 1
    nodes = grid.nodes()
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            curves = list(pool.map(forward, nodes))
    else:
        curves = [forward(node) for node in nodes]

    thetas, targets, seeds = [], [], []
    for i, (node, exact) in enumerate(zip(nodes, curves)):
        for r in range(repetitions):
            thetas.append(node)
            if n_m is None:
                targets.append(np.array(exact, dtype=float))
                seeds.append(0)
                continue
            rng = derive_rng(seed, "calibration", i, r)
            targets.append(sample_shots(exact, n_m, rng) / n_m)
            seeds.append(sub_seed(seed, "calibration", i, r))
    describe = getattr(forward, "describe", lambda: {"kind": type(forward).__name__})
    return CalibrationDataset(
        thetas=np.array(thetas),
        targets=np.array(targets),
        times=np.asarray(getattr(forward, "times", np.arange(len(curves[0]))), dtype=float),
        grid=grid,
        n_m=n_m,
        repetitions=repetitions,
        seed=seed,
        source=describe(),
        sub_seeds=np.array(seeds, dtype=np.int64),
    )


def simulate_observations(forward, true_theta, n_p: int = 100, seed: int = 0, run: int = 0) -> ObservationSet:
    """Draw ``n_p`` shots per instant from the exact curve at ``true_theta``."""
    exact = np.asarray(forward(true_theta), dtype=float)
    times = np.asarray(getattr(forward, "times", np.arange(exact.size)), dtype=float)
    if n_p == 0:
        counts = np.zeros(exact.shape, dtype=np.int64)
    else:
        counts = sample_shots(exact, n_p, derive_rng(seed, "observations", run))
    return ObservationSet(
        times=times,
        successes=counts,
        n_p=int(n_p),
        true_theta=tuple(float(v) for v in np.atleast_1d(true_theta)),
        seed=seed,
    )
