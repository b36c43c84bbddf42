"""Exact dynamics of the open-boundary XXZ chain in a transverse field.

Basis convention: computational basis with ``|0> = |up>`` (sigma_z = +1) and
``|1> = |down>``.  Site 1 is the leftmost tensor factor, i.e. the most
significant bit of the basis index.  The lowering operator acts as
``sigma_- |0> = |1>``.

The initial state of every protocol is the zero-field ground state of the
chain at the same ``j_z``.  Observables are the projectors
``(sigma^a_{N/2} + 1) / 2`` with ``a`` in ``{x, y}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

Axis = Literal["x", "y"]

MAX_SITES_UNITARY = 12
MAX_SITES_LINDBLAD = 6

HERMITIAN_TOL = 1e-12
DEGENERACY_TOL = 1e-10
PROBABILITY_TOL = 1e-10
TRACE_TOL = 1e-8

LINDBLAD_STEP = 5e-3
RICHARDSON_TOL = 1e-6

DEFAULT_TIMES = np.round(np.linspace(0.0, 5.0, 101), 12)

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}


class SpinChainError(ValueError):
    """Invalid chain parameters or a failed numerical guard."""


class StepSizeError(RuntimeError):
    """The fixed-step integrator could not meet its accuracy check."""


@dataclass(frozen=True)
class SpinChainModel:
    """Chain size, ZZ anisotropy and the two in-plane field components."""

    n_sites: int
    j_z: float = 0.0
    g_x: float = 0.0
    g_y: float = 0.0

    def validate(self, max_sites: int = MAX_SITES_UNITARY) -> None:
        if int(self.n_sites) != self.n_sites or self.n_sites < 2:
            raise SpinChainError(f"n_sites must be an integer >= 2, got {self.n_sites}")
        if self.n_sites % 2:
            raise SpinChainError(f"n_sites must be even, got {self.n_sites}")
        if self.n_sites > max_sites:
            raise SpinChainError(
                f"n_sites={self.n_sites} exceeds the resource cap of {max_sites}"
            )
        for name in ("j_z", "g_x", "g_y"):
            if not np.isfinite(getattr(self, name)):
                raise SpinChainError(f"{name} must be finite")

    def with_field(self, g_x: float, g_y: float = 0.0) -> "SpinChainModel":
        return SpinChainModel(self.n_sites, self.j_z, float(g_x), float(g_y))

    @property
    def dim(self) -> int:
        return 2**self.n_sites

    @property
    def probe_site(self) -> int:
        """1-based index of the measured site, N/2."""
        return self.n_sites // 2


@dataclass(frozen=True)
class ObservableCurve:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.times.shape != self.values.shape:
            raise SpinChainError("times and values must have the same length")


def local_operator(n_sites: int, site: int, kind: str) -> np.ndarray:
    """Dense single-site operator (``x``, ``y``, ``z`` or ``-``) at 1-based ``site``."""
    if not 1 <= site <= n_sites:
        raise SpinChainError(f"site {site} outside 1..{n_sites}")
    left = np.eye(2 ** (site - 1))
    right = np.eye(2 ** (n_sites - site))
    return np.kron(np.kron(left, _PAULI[kind]), right)


@lru_cache(maxsize=16)
def _hamiltonian_parts(n_sites: int, j_z: float):
    # Coupling part and the two field sums; cached per (N, J_z).
    dim = 2**n_sites
    coupling = np.zeros((dim, dim), dtype=complex)
    ops = {a: [local_operator(n_sites, i, a) for i in range(1, n_sites + 1)] for a in "xyz"}
    for i in range(n_sites - 1):
        coupling -= ops["x"][i] @ ops["x"][i + 1]
        coupling -= ops["y"][i] @ ops["y"][i + 1]
        if j_z:
            coupling -= j_z * (ops["z"][i] @ ops["z"][i + 1])
    field_x = sum(ops["x"])
    field_y = sum(ops["y"])
    for m in (coupling, field_x, field_y):
        m.setflags(write=False)
    return coupling, field_x, field_y


def build_hamiltonian(model: SpinChainModel, max_sites: int = MAX_SITES_UNITARY) -> np.ndarray:
    """Dense XXZ Hamiltonian with open boundaries and an in-plane field.

    H = -sum_i (X_i X_{i+1} + Y_i Y_{i+1} + J_z Z_i Z_{i+1}) + g_x sum_i X_i + g_y sum_i Y_i
    """
    model.validate(max_sites)
    coupling, field_x, field_y = _hamiltonian_parts(model.n_sites, float(model.j_z))
    h = coupling.copy()
    if model.g_x:
        h += model.g_x * field_x
    if model.g_y:
        h += model.g_y * field_y
    check_hermitian(h)
    return h


def check_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise SpinChainError("operator must be a square matrix")
    dim = h.shape[0]
    if dim < 1 or dim & (dim - 1):
        raise SpinChainError(f"dimension {dim} is not a power of two")
    if np.max(np.abs(h - h.conj().T), initial=0.0) >= tol:
        raise SpinChainError("operator is not Hermitian")


def fix_phase(psi: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude amplitude is real and >= 0.

    Ties in magnitude (within 1e-12) resolve to the lowest basis index.
    """
    mags = np.abs(psi)
    k = int(np.flatnonzero(mags >= mags.max() - 1e-12)[0])
    return psi * (np.conj(psi[k]) / mags[k])


def _leading_index(v: np.ndarray) -> int:
    mags = np.abs(v)
    return int(np.flatnonzero(mags >= mags.max() - 1e-12)[0])


def ground_state(h: np.ndarray) -> tuple[np.ndarray, float]:
    """Lowest eigenvector of ``h`` (phase-fixed) and its energy.

    If the minimum is degenerate within 1e-10, the eigenvector whose
    largest-magnitude amplitude sits at the lowest basis index wins.
    """
    check_hermitian(h)
    evals, evecs = np.linalg.eigh(h)
    candidates = np.flatnonzero(evals <= evals[0] + DEGENERACY_TOL)
    best = min(candidates, key=lambda c: (_leading_index(evecs[:, c]), c))
    psi = evecs[:, best]
    psi = psi / np.linalg.norm(psi)
    return fix_phase(psi), float(evals[best])


@lru_cache(maxsize=16)
def _initial_state(n_sites: int, j_z: float) -> np.ndarray:
    psi, _ = ground_state(build_hamiltonian(SpinChainModel(n_sites, j_z)))
    psi.setflags(write=False)
    return psi


def initial_state(model: SpinChainModel) -> np.ndarray:
    """Zero-field ground state at the model's ``j_z`` (the critical point for ``j_z=0``)."""
    model.validate(max(MAX_SITES_UNITARY, model.n_sites))
    return _initial_state(model.n_sites, float(model.j_z))


def apply_pauli(psi: np.ndarray, n_sites: int, site: int, axis: str) -> np.ndarray:
    """Apply sigma^axis on ``site`` to a state (or the columns of a matrix of states)."""
    dim = 2**n_sites
    mask = 1 << (n_sites - site)
    idx = np.arange(dim)
    flipped = psi[idx ^ mask]
    if axis == "x":
        return flipped
    if axis == "y":
        # sigma_y|0> = i|1>, sigma_y|1> = -i|0>
        phase = np.where(idx & mask, 1j, -1j)
        if psi.ndim == 2:
            phase = phase[:, None]
        return phase * flipped
    raise SpinChainError(f"unsupported observable axis {axis!r}")


def projector_expectation(states: np.ndarray, n_sites: int, axis: str) -> np.ndarray:
    """<(sigma^axis_{N/2} + 1)/2> for each column of ``states``."""
    site = n_sites // 2
    sig = np.real(np.sum(states.conj() * apply_pauli(states, n_sites, site, axis), axis=0))
    return 0.5 * (sig + 1.0)


def _checked_probabilities(values: np.ndarray) -> np.ndarray:
    if np.any(values < -PROBABILITY_TOL) or np.any(values > 1 + PROBABILITY_TOL):
        worst = float(np.max(np.maximum(-values, values - 1)))
        raise SpinChainError(f"expectation value outside [0, 1] by {worst:.3e}")
    return np.clip(values, 0.0, 1.0)


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise SpinChainError("times must be a non-empty 1-D array")
    if np.any(np.diff(times) <= 0):
        raise SpinChainError("times must be strictly increasing")
    if times[0] < 0:
        raise SpinChainError("times must be non-negative")
    return times


def evolve_states(model: SpinChainModel, times=DEFAULT_TIMES) -> np.ndarray:
    """Evolved states ``exp(-iHt) psi0`` as columns, one per instant.

    One dense eigendecomposition of H serves every instant.
    """
    times = _check_times(times)
    h = build_hamiltonian(model)
    psi0 = initial_state(model)
    evals, evecs = np.linalg.eigh(h)
    coeffs = evecs.conj().T @ psi0
    return evecs @ (np.exp(-1j * np.outer(evals, times)) * coeffs[:, None])


def evolve_expectation(model: SpinChainModel, observable_axis: Axis = "x", times=DEFAULT_TIMES) -> ObservableCurve:
    """Exact unitary curve of the local projector observable."""
    times = _check_times(times)
    states = evolve_states(model, times)
    values = projector_expectation(states, model.n_sites, observable_axis)
    return ObservableCurve(times, _checked_probabilities(values))


# --- open-system dynamics -------------------------------------------------


def _lindblad_rhs_factory(h: np.ndarray, n_sites: int, gamma: float):
    dim = h.shape[0]
    idx = np.arange(dim)
    jumps = []
    for site in range(1, n_sites + 1):
        mask = 1 << (n_sites - site)
        up = idx[(idx & mask) == 0]
        jumps.append((np.ix_(up | mask, up | mask), np.ix_(up, up)))
    # sum_k L_k^dag L_k = sum_k |0><0|_k, i.e. the number of up spins
    n_up = np.array([n_sites - bin(i).count("1") for i in range(dim)], dtype=float)
    h_eff = h - 0.5j * gamma * np.diag(n_up)
    h_eff_dag = h_eff.conj().T

    def rhs(rho):
        out = -1j * (h_eff @ rho - rho @ h_eff_dag)
        if gamma:
            for dst, src in jumps:
                out[dst] += gamma * rho[src]
        return out

    return rhs


def _rk4_segment(rhs, rho, duration, step):
    n = max(1, int(np.ceil(duration / step - 1e-9)))
    h = duration / n
    for _ in range(n):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * h * k1)
        k3 = rhs(rho + 0.5 * h * k2)
        k4 = rhs(rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


def propagate_lindblad(h, rho0, n_sites, gamma, times, step=LINDBLAD_STEP):
    """Density matrices at each instant by fixed-step RK4.

    The run is repeated at half step; a disagreement above 1e-6 (max entry)
    raises :class:`StepSizeError`.  The half-step result is returned.  No
    trace renormalisation is applied.
    """
    times = _check_times(times)
    rhs = _lindblad_rhs_factory(np.asarray(h, dtype=complex), n_sites, gamma)
    coarse = np.array(rho0, dtype=complex)
    fine = coarse.copy()
    out = np.empty((times.size,) + coarse.shape, dtype=complex)
    t_prev = 0.0
    for j, t in enumerate(times):
        if t > t_prev:
            coarse = _rk4_segment(rhs, coarse, t - t_prev, step)
            fine = _rk4_segment(rhs, fine, t - t_prev, step / 2)
            err = np.max(np.abs(coarse - fine))
            if not np.isfinite(err) or err > RICHARDSON_TOL:
                raise StepSizeError(
                    f"RK4 step {step} fails the half-step check at t={t} (diff {err:.2e})"
                )
        out[j] = fine
        t_prev = t
    traces = np.real(np.trace(out, axis1=1, axis2=2))
    if np.max(np.abs(traces - 1)) > TRACE_TOL:
        raise StepSizeError("trace drifted beyond 1e-8")
    return out


def evolve_lindblad(
    model: SpinChainModel,
    gamma: float,
    observable_axis: Axis = "x",
    times=DEFAULT_TIMES,
    max_sites: int = MAX_SITES_LINDBLAD,
    step: float = LINDBLAD_STEP,
) -> ObservableCurve:
    """Observable curve under the Lindblad equation with per-site sigma_- decay."""
    if not np.isfinite(gamma) or gamma < 0:
        raise SpinChainError(f"gamma must be finite and >= 0, got {gamma}")
    model.validate(max_sites)
    times = _check_times(times)
    h = build_hamiltonian(model, max_sites=max_sites)
    psi0 = initial_state(model)
    rho0 = np.outer(psi0, psi0.conj())
    rhos = propagate_lindblad(h, rho0, model.n_sites, gamma, times, step)
    site = model.probe_site
    sig = local_operator(model.n_sites, site, observable_axis)
    values = 0.5 * (np.real(np.einsum("ij,tji->t", sig, rhos)) + 1.0)
    return ObservableCurve(times, _checked_probabilities(values))


def curve(model: SpinChainModel, observable_axis: Axis = "x", times=DEFAULT_TIMES, gamma: float | None = None) -> np.ndarray:
    """Exact curve values; unitary if ``gamma`` is None, Lindblad otherwise."""
    if gamma is None:
        return evolve_expectation(model, observable_axis, times).values
    return evolve_lindblad(model, gamma, observable_axis, times).values


@dataclass(frozen=True)
class ExactForward:
    """Exact forward map from field parameters to the observable curve.

    ``params`` names the components of theta: ``("g_x",)`` for the 1D field
    or ``("g_x", "g_y")`` for the in-plane field.  ``gamma=None`` selects
    unitary dynamics.
    """

    n_sites: int
    j_z: float = 0.0
    observable_axis: str = "x"
    gamma: float | None = None
    params: tuple[str, ...] = ("g_x",)
    times: tuple[float, ...] = tuple(DEFAULT_TIMES)

    def __post_init__(self):
        if set(self.params) - {"g_x", "g_y"} or len(set(self.params)) != len(self.params):
            raise SpinChainError(f"params must be drawn from g_x, g_y; got {self.params}")
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        cap = MAX_SITES_UNITARY if self.gamma is None else MAX_SITES_LINDBLAD
        SpinChainModel(self.n_sites, self.j_z).validate(cap)

    @property
    def n_params(self) -> int:
        return len(self.params)

    def model(self, theta) -> SpinChainModel:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.n_params,):
            raise SpinChainError(f"theta must have {self.n_params} components, got {theta.shape}")
        fields = dict(zip(self.params, theta))
        return SpinChainModel(self.n_sites, self.j_z, fields.get("g_x", 0.0), fields.get("g_y", 0.0))

    def __call__(self, theta) -> np.ndarray:
        return _cached_curve(self, tuple(float(v) for v in np.atleast_1d(theta)))

    def curves(self, thetas) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float).reshape(-1, self.n_params)
        return np.stack([self(t) for t in thetas])

    def describe(self) -> dict:
        return {
            "kind": "exact",
            "n_sites": self.n_sites,
            "j_z": self.j_z,
            "observable_axis": self.observable_axis,
            "gamma": self.gamma,
            "params": list(self.params),
            "n_times": len(self.times),
            "t_max": self.times[-1],
        }


@lru_cache(maxsize=8192)
def _cached_curve(fwd: ExactForward, theta: tuple) -> np.ndarray:
    values = curve(fwd.model(theta), fwd.observable_axis, np.array(fwd.times), fwd.gamma)
    values.setflags(write=False)
    return values
