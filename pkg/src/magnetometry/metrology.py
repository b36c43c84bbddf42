"""Quantum Fisher information, Cramer-Rao bounds and precision scaling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import spin_chain
from .bayes import RepeatedEstimate, repeated_estimation

QFI_STEP = 1e-5
RICHARDSON_REL_TOL = 0.01
RICHARDSON_ABS_TOL = 1e-6
NEGATIVE_TOL = 1e-8


class QfiError(RuntimeError):
    pass


def cramer_rao(qfi: float) -> float:
    """Single-shot precision bound 1/sqrt(I); ``inf`` flags an unbounded estimate."""
    if qfi < 0:
        raise ValueError("QFI must be non-negative")
    return math.inf if qfi == 0 else 1.0 / math.sqrt(qfi)


@dataclass(frozen=True)
class QfiResult:
    theta: float
    qfi: float
    step: float

    @property
    def bound(self) -> float:
        return cramer_rao(self.qfi)

    @property
    def bounded(self) -> bool:
        return self.qfi > 0


def _aligned(ref: np.ndarray, psi: np.ndarray) -> np.ndarray:
    overlap = np.vdot(ref, psi)
    if abs(overlap) < 1e-300:
        return psi
    return psi * (np.conj(overlap) / abs(overlap))


def _qfi_at_step(state_fn, theta, h) -> float:
    psi = np.asarray(state_fn(theta), dtype=complex)
    plus = _aligned(psi, np.asarray(state_fn(theta + h), dtype=complex))
    minus = _aligned(psi, np.asarray(state_fn(theta - h), dtype=complex))
    dpsi = (plus - minus) / (2 * h)
    return 4.0 * (np.vdot(dpsi, dpsi).real - abs(np.vdot(psi, dpsi)) ** 2)


def qfi_pure(state_fn, theta: float, step: float = QFI_STEP) -> QfiResult:
    """QFI of a pure-state family by gauge-aligned central differences.

    The neighbouring states are phase-rotated so their overlap with the
    central state is real and positive.  The value at ``step`` is checked
    against ``step/2``; disagreement beyond 1% (plus a 1e-6 absolute floor)
    means the difference is lost in rounding noise and raises.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    coarse = _qfi_at_step(state_fn, theta, step)
    fine = _qfi_at_step(state_fn, theta, step / 2)
    if abs(coarse - fine) > RICHARDSON_REL_TOL * max(abs(coarse), abs(fine)) + RICHARDSON_ABS_TOL:
        raise QfiError(
            f"QFI unstable between steps {step} and {step / 2} ({coarse:.6g} vs {fine:.6g}); "
            f"try a larger step such as {step * 10:g}"
        )
    if fine < -NEGATIVE_TOL:
        raise QfiError(f"QFI came out negative ({fine:.3e})")
    return QfiResult(float(theta), max(float(fine), 0.0), float(step))


def chain_state_fn(n_sites: int, t: float = 5.0, param: str = "g_x", j_z: float = 0.0, **fixed):
    """theta -> exp(-i H(theta) t) psi0 for the spin chain; ``fixed`` pins the other field."""

    def state(theta):
        fields = {"g_x": 0.0, "g_y": 0.0, **fixed, param: theta}
        model = spin_chain.SpinChainModel(n_sites, j_z, fields["g_x"], fields["g_y"])
        return spin_chain.evolve_states(model, [t])[:, 0]

    return state


@dataclass
class ScalingFit:
    sizes: np.ndarray
    precisions: np.ndarray
    alpha: float
    prefactor: float
    residuals: np.ndarray
    summaries: dict = field(default_factory=dict)

    def predict(self, sizes) -> np.ndarray:
        return self.prefactor * np.asarray(sizes, dtype=float) ** (-self.alpha)


def fit_scaling(sizes, precisions) -> ScalingFit:
    """Least-squares line through (ln N, ln precision); ``alpha`` is minus the slope.

    Residuals are kept so a breakdown of the power law stays visible.
    """
    n = np.asarray(sizes, dtype=float)
    d = np.asarray(precisions, dtype=float)
    if n.shape != d.shape or n.ndim != 1:
        raise ValueError("sizes and precisions must be 1-D arrays of equal length")
    if np.unique(n).size < 2:
        raise ValueError("need at least two distinct sizes")
    if np.any(n <= 0) or np.any(d <= 0):
        raise ValueError("sizes and precisions must be positive")
    x, y = np.log(n), np.log(d)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return ScalingFit(n, d, float(-slope), float(np.exp(intercept)), resid)


def precision_vs_size_experiment(
    true_theta,
    sizes,
    inference_forwards: dict,
    true_forwards: dict | None = None,
    n_runs: int = 10,
    seeds=None,
    n_p: int = 100,
    grid=None,
    dim: int = 0,
) -> ScalingFit:
    """Repeated estimation at each size, then a power-law fit of the mean std.

    ``inference_forwards`` maps N to the forward map used in the likelihood
    (typically a trained surrogate); ``true_forwards`` maps N to the exact
    simulator that generates observations, built on demand if omitted.
    """
    sizes = [int(n) for n in sizes]
    if len(set(sizes)) < 2:
        raise ValueError("need at least two distinct sizes")
    missing = [n for n in sizes if n not in inference_forwards]
    if missing:
        raise KeyError(f"no forward model for N={missing}")
    summaries: dict[int, RepeatedEstimate] = {}
    for n in sizes:
        inf_fwd = inference_forwards[n]
        truth = (true_forwards or {}).get(n)
        if truth is None:
            truth = spin_chain.ExactForward(n, params=_params_for(inf_fwd, true_theta))
        summaries[n] = repeated_estimation(
            truth, true_theta, inf_fwd, n_runs=n_runs, seeds=seeds, n_p=n_p, grid=grid
        )
    fit = fit_scaling(sizes, [summaries[n].mean_std[dim] for n in sizes])
    fit.summaries = summaries
    return fit


def _params_for(forward, theta):
    m = getattr(forward, "n_params", np.atleast_1d(theta).size)
    return ("g_x",) if m == 1 else ("g_x", "g_y")
