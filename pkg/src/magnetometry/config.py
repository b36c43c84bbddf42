"""Experiment configuration: a versioned YAML document with nested sections.

Example::

    schema_version: 1
    seed: 2024
    model: {n_sites: 8, j_z: 0.0, params: [g_x], observable_axis: x, gamma: null}
    times: {t_max: 5.0, n_times: 101}
    dataset: {box: [0.0, 0.5], grid_points: 51, n_m: 100, repetitions: 10}
    training: {solver: adam, max_epochs: 60000, target_cost: 1.0e-5, patience: 2000}
    inference: {grid_points: 501, n_p: 100, n_runs: 10, true_theta: [0.1], forward: surrogate}
    scaling: {sizes: [4, 6, 8, 10]}

Every field has a default, so a config only needs the keys it changes.
Unknown keys are rejected to catch typos.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import numpy as np
import yaml

from .grid import ParameterGrid
from .spin_chain import ExactForward

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class ModelSpec:
    n_sites: int = 8
    j_z: float = 0.0
    params: list = field(default_factory=lambda: ["g_x"])
    observable_axis: str = "x"
    gamma: float | None = None


@dataclass
class TimeSpec:
    t_max: float = 5.0
    n_times: int = 101

    def grid(self) -> np.ndarray:
        return np.round(np.linspace(0.0, self.t_max, self.n_times), 12)


@dataclass
class DatasetSpec:
    box: list = field(default_factory=lambda: [0.0, 0.5])
    grid_points: int = 51
    n_m: int | None = 100
    repetitions: int = 10


@dataclass
class TrainingSpec:
    solver: str = "adam"
    hidden_layer_sizes: list = field(default_factory=lambda: [6, 12, 25, 50])
    max_epochs: int = 60000
    target_cost: float = 1e-5
    learning_rate: float = 1e-2
    lr_decay: float = 1e-3
    split: list = field(default_factory=lambda: [0.70, 0.15, 0.15])
    patience: int | None = 2000

    def estimator_params(self) -> dict:
        return {
            "solver": self.solver,
            "hidden_layer_sizes": tuple(self.hidden_layer_sizes),
            "max_epochs": self.max_epochs,
            "target_cost": self.target_cost,
            "learning_rate": self.learning_rate,
            "lr_decay": self.lr_decay,
            "split": tuple(self.split),
            "patience": self.patience,
        }


@dataclass
class InferenceSpec:
    grid_points: int | None = None
    n_p: int = 100
    n_runs: int = 10
    true_theta: list = field(default_factory=lambda: [0.1])
    forward: str = "surrogate"


@dataclass
class ScalingSpec:
    sizes: list = field(default_factory=lambda: [4, 6, 8, 10])
    true_thetas: list | None = None


@dataclass
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    model: ModelSpec = field(default_factory=ModelSpec)
    times: TimeSpec = field(default_factory=TimeSpec)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    training: TrainingSpec = field(default_factory=TrainingSpec)
    inference: InferenceSpec = field(default_factory=InferenceSpec)
    scaling: ScalingSpec = field(default_factory=ScalingSpec)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.seed is None:
            raise ConfigError("seed is required")
        if self.model.params not in (["g_x"], ["g_x", "g_y"]):
            raise ConfigError("model.params must be [g_x] or [g_x, g_y]")
        if self.model.observable_axis not in ("x", "y"):
            raise ConfigError("model.observable_axis must be x or y")
        if self.model.gamma is not None and self.model.gamma < 0:
            raise ConfigError("model.gamma must be >= 0")
        if len(self.inference.true_theta) != len(self.model.params):
            raise ConfigError("inference.true_theta must have one value per parameter")
        if abs(sum(self.training.split) - 1.0) > 1e-9:
            raise ConfigError("training.split must sum to 1")
        if self.inference.forward not in ("surrogate", "exact"):
            raise ConfigError("inference.forward must be surrogate or exact")

    # -- derived objects -------------------------------------------------------

    @property
    def n_params(self) -> int:
        return len(self.model.params)

    def forward(self, n_sites: int | None = None) -> ExactForward:
        return ExactForward(
            n_sites=self.model.n_sites if n_sites is None else int(n_sites),
            j_z=self.model.j_z,
            observable_axis=self.model.observable_axis,
            gamma=self.model.gamma,
            params=tuple(self.model.params),
            times=tuple(self.times.grid()),
        )

    def calibration_grid(self) -> ParameterGrid:
        lo, hi = self.dataset.box
        return ParameterGrid.uniform(self.n_params, lo, hi, self.dataset.grid_points)

    def inference_grid(self) -> ParameterGrid:
        lo, hi = self.dataset.box
        return ParameterGrid.uniform(self.n_params, lo, hi, self.inference.grid_points)

    def input_bounds(self) -> list:
        return [list(self.dataset.box)] * self.n_params

    # -- serialisation -------------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.to_yaml().encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict | None) -> "ExperimentConfig":
        return _build(cls, data or {}, "config")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        data = yaml.safe_load(path.read_text())
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} is empty or not a mapping")
        return cls.from_dict(data)

    def dump(self, path) -> None:
        Path(path).write_text(self.to_yaml())


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = known[name].default_factory() if callable(known[name].default_factory) else None
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value or {}, f"{where}.{name}")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
