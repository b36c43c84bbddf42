"""Rectangular parameter grids over the field box."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GridAxis:
    lo: float
    hi: float
    num: int

    def __post_init__(self):
        if self.num < 2:
            raise ValueError("a grid axis needs at least 2 points")
        if not self.hi > self.lo:
            raise ValueError("grid axis must be strictly increasing (hi > lo)")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.num)

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.num - 1)

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "num": self.num}


@dataclass(frozen=True)
class ParameterGrid:
    """Cartesian product of uniform axes; nodes are ordered with the last axis fastest."""

    axes: tuple[GridAxis, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.axes:
            raise ValueError("grid needs at least one axis")
        object.__setattr__(self, "axes", tuple(self.axes))

    @classmethod
    def uniform(cls, ndim: int = 1, lo: float = 0.0, hi: float = 0.5, num: int | None = None) -> "ParameterGrid":
        if num is None:
            num = 501 if ndim == 1 else 101
        return cls(tuple(GridAxis(lo, hi, num) for _ in range(ndim)))

    @classmethod
    def from_dict(cls, data) -> "ParameterGrid":
        return cls(tuple(GridAxis(float(a["lo"]), float(a["hi"]), int(a["num"])) for a in data))

    def to_dict(self) -> list:
        return [a.to_dict() for a in self.axes]

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.num for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def bounds(self) -> np.ndarray:
        return np.array([[a.lo, a.hi] for a in self.axes])

    def points(self) -> list[np.ndarray]:
        return [a.points for a in self.axes]

    def nodes(self) -> np.ndarray:
        """All grid nodes as an array of shape (size, ndim)."""
        mesh = np.meshgrid(*self.points(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def trapezoid_weights(self) -> np.ndarray:
        """Per-node trapezoid quadrature weights, shaped like the grid."""
        w = np.ones(self.shape)
        for d, a in enumerate(self.axes):
            wd = np.full(a.num, a.spacing)
            wd[[0, -1]] *= 0.5
            shape = [1] * self.ndim
            shape[d] = a.num
            w = w * wd.reshape(shape)
        return w
