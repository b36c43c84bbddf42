"""End-to-end protocol: calibrate -> train -> infer -> scale.

All randomness is derived from ``config.seed`` through labelled streams, so
each stage is reproducible on its own and independent of execution order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import reference
from ._random import sub_seed
from .bayes import GridBayesEstimator, RepeatedEstimate, repeated_estimation
from .config import ExperimentConfig
from .metrology import fit_scaling
from .sampling import CalibrationDataset, build_calibration_dataset, simulate_observations
from .surrogate import MLPSurrogate, TrainingMetrics, evaluate_regression

logger = logging.getLogger(__name__)

TABLE_SPECS = {
    "A1": {"params": ["g_x"], "axis": "x", "thetas": [(0.1,)], "n_runs": 1},
    "A2": {"params": ["g_x"], "axis": "x", "thetas": [(0.05,), (0.1,), (0.15,), (0.2,)], "n_runs": 10},
    "A3": {"params": ["g_x", "g_y"], "axis": "y", "thetas": [(0.05, 0.05), (0.075, 0.075), (0.1, 0.1)], "n_runs": 10},
}


def _seed32(*parts) -> int:
    return sub_seed(*parts) % (2**32)


def calibrate(config: ExperimentConfig, n_sites: int | None = None) -> CalibrationDataset:
    n = config.model.n_sites if n_sites is None else n_sites
    return build_calibration_dataset(
        config.forward(n),
        config.calibration_grid(),
        n_m=config.dataset.n_m,
        repetitions=config.dataset.repetitions,
        seed=sub_seed(config.seed, "dataset", n),
    )


def train(config: ExperimentConfig, dataset: CalibrationDataset, n_sites: int | None = None) -> MLPSurrogate:
    """Fit a surrogate and attach regression diagnostics against exact test curves."""
    n = config.model.n_sites if n_sites is None else n_sites
    model = MLPSurrogate(
        **config.training.estimator_params(),
        input_bounds=config.input_bounds(),
        random_state=_seed32(config.seed, "training", n),
    )
    model.fit(dataset.thetas, dataset.targets)
    if len(model.test_indices_):
        test_thetas = dataset.thetas[model.test_indices_]
        ideal = config.forward(n).curves(test_thetas)
        model.metrics_.regression = evaluate_regression(model.predict(test_thetas), ideal)
    return model


def surrogate_for(config: ExperimentConfig, n_sites: int):
    dataset = calibrate(config, n_sites)
    return train(config, dataset, n_sites), dataset


def observation_seeds(config: ExperimentConfig, n_sites: int, theta, n_runs: int) -> list[int]:
    key = [int(round(v * 1e6)) for v in np.atleast_1d(theta)]
    return [sub_seed(config.seed, "observations", n_sites, *key, r) for r in range(n_runs)]


def estimate(config: ExperimentConfig, n_sites: int, theta, inference_forward, n_runs: int) -> RepeatedEstimate:
    return repeated_estimation(
        config.forward(n_sites),
        theta,
        inference_forward,
        n_runs=n_runs,
        seeds=observation_seeds(config, n_sites, theta, n_runs),
        n_p=config.inference.n_p,
        grid=config.inference_grid(),
    )


def infer_once(config: ExperimentConfig, inference_forward, observations=None):
    """Posterior for one observation set (synthetic from ``true_theta`` if none given)."""
    n = config.model.n_sites
    if observations is None:
        theta = tuple(config.inference.true_theta)
        seed = observation_seeds(config, n, theta, 1)[0]
        observations = simulate_observations(config.forward(n), theta, config.inference.n_p, seed)
    est = GridBayesEstimator(inference_forward, config.inference_grid()).fit(observations)
    return est, observations


@dataclass
class TableResult:
    table: str
    rows: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)

    @property
    def all_within_bands(self) -> bool:
        return all(r["mean_ok"] and r["std_ok"] for r in self.rows)


def table_config(table: str, config: ExperimentConfig) -> ExperimentConfig:
    """Copy of ``config`` with the model section set for the requested table."""
    spec = TABLE_SPECS[table]
    data = config.to_dict()
    data["model"].update(params=spec["params"], observable_axis=spec["axis"], gamma=None)
    data["inference"]["true_theta"] = list(spec["thetas"][0])
    return ExperimentConfig.from_dict(data)


def reproduce_table(table: str, config: ExperimentConfig, surrogates: dict | None = None) -> TableResult:
    """Run the full protocol for one reference table and compare cell by cell.

    ``surrogates`` (N -> trained model) may be supplied to skip training;
    otherwise one model per N is calibrated and trained from scratch.
    """
    table = table.upper()
    if table not in TABLE_SPECS:
        raise ValueError(f"unknown table {table!r}; choose from {sorted(TABLE_SPECS)}")
    spec = TABLE_SPECS[table]
    cfg = table_config(table, config)
    ref = {"A1": reference.TABLE_A1, "A2": reference.TABLE_A2, "A3": reference.TABLE_A3}[table]
    sizes = [int(n) for n in cfg.scaling.sizes]
    thetas = [tuple(t) for t in (cfg.scaling.true_thetas or spec["thetas"])]
    n_runs = spec["n_runs"] if table == "A1" else cfg.inference.n_runs
    result = TableResult(table)

    models = dict(surrogates or {})
    for n in sizes:
        if n not in models:
            logger.info("table %s: training surrogate for N=%d", table, n)
            models[n], _ = surrogate_for(cfg, n)
        m = models[n].metrics_ if hasattr(models[n], "metrics_") else TrainingMetrics()
        result.training[n] = {
            "epochs": m.epochs,
            "best_val_cost": m.best_val_cost,
            "test_cost": m.test_cost,
            "stop_reason": m.stop_reason,
            "regression": m.regression,
        }

    for theta in thetas:
        deltas = {d: [] for d in range(len(theta))}
        for n in sizes:
            rep = estimate(cfg, n, theta, models[n], n_runs)
            row = {"theta": list(theta), "N": n, "estimate": rep.mean_estimate.tolist(), "std": rep.mean_std.tolist()}
            key = (theta if len(theta) > 1 else theta[0], n)
            row["reference"] = list(ref[key]) if key in ref else None
            oks = []
            for d in range(len(theta)):
                deltas[d].append(rep.mean_std[d])
                if row["reference"] is not None:
                    m_ref = row["reference"][d]
                    s_ref = row["reference"][len(theta) + d]
                    oks.append(reference.within_bands(rep.mean_estimate[d], rep.mean_std[d], m_ref, s_ref))
            row["mean_ok"] = all(o["mean_ok"] for o in oks) if oks else True
            row["std_ok"] = all(o["std_ok"] for o in oks) if oks else True
            row["std_ratio"] = [o["std_ratio"] for o in oks]
            result.rows.append(row)
        if len(sizes) >= 2:
            for d, vals in deltas.items():
                result.fits[(theta, d)] = fit_scaling(sizes, vals)
    return result
