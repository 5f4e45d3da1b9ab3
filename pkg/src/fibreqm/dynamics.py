"""Conventional Hilbert-space dynamics: the reference oracle.

The step propagator is the exponential midpoint rule

    psi(t + h) = exp(-i h H(t + h/2) / hbar) psi(t)

which is exactly unitary per step for Hermitian H, so norm drift never
confounds equivalence measurements.  Two-time evolution operators are
materialized as ordered products of the step propagators on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .hilbert import (
    PhysicalConstants,
    as_operator,
    as_state,
    is_hermitian,
    matrix_exponential,
    max_abs,
)

__all__ = [
    "DensityTrajectory",
    "HamiltonianFamily",
    "ObservableFamily",
    "OffGridTimeError",
    "PropagatorGrid",
    "Trajectory",
    "conjugate_by",
    "drift_budget",
    "evolution_operator",
    "evolve_density",
    "evolve_state",
    "mean_value",
    "mean_value_density",
    "uniform_grid",
]


class OffGridTimeError(ValueError):
    """A two-time quantity was requested at a time not on the sampling grid."""


def uniform_grid(t0: float, t1: float, steps: int) -> np.ndarray:
    """Uniform grid with `steps` intervals (steps + 1 sample times)."""
    if not (np.isfinite(t0) and np.isfinite(t1) and t0 < t1):
        raise ValueError(f"need finite t0 < t1, got [{t0}, {t1}]")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    return np.linspace(float(t0), float(t1), steps + 1)


def _steps_from(t0: float, t1: float, step: float) -> int:
    if not (step > 0 and np.isfinite(step)):
        raise ValueError(f"step must be a positive real, got {step}")
    if not t1 > t0:
        raise ValueError(f"need t0 < t1, got [{t0}, {t1}]")
    steps = int(round((t1 - t0) / step))
    return max(steps, 1)


class HamiltonianFamily:
    """Time-indexed Hamiltonian t -> H(t) of a fixed dimension.

    `hermitian_expected` declares whether H(t) should pass the Hermiticity
    predicate wherever it is sampled; non-Hermitian families are allowed but
    unitarity-based checks are skipped for them downstream.
    """

    def __init__(self, matrix_fn: Callable[[float], np.ndarray], dimension: int,
                 hermitian_expected: bool = True, name: str = "custom"):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self._fn = matrix_fn
        self.dimension = int(dimension)
        self.hermitian_expected = bool(hermitian_expected)
        self.name = name

    @classmethod
    def constant(cls, matrix, hermitian_expected: Optional[bool] = None,
                 name: str = "constant") -> "HamiltonianFamily":
        m = as_operator(matrix)
        if hermitian_expected is None:
            hermitian_expected = is_hermitian(m, 1e-12 * max(1.0, max_abs(m)))
        return cls(lambda t: m, m.shape[0], hermitian_expected, name)

    @classmethod
    def zero(cls, dimension: int) -> "HamiltonianFamily":
        z = np.zeros((dimension, dimension), dtype=complex)
        return cls(lambda t: z, dimension, True, "zero")

    def at(self, t: float) -> np.ndarray:
        m = as_operator(self._fn(float(t)))
        if m.shape[0] != self.dimension:
            raise ValueError(
                f"Hamiltonian family '{self.name}' returned dimension {m.shape[0]}, "
                f"expected {self.dimension}")
        return m

    def at_many(self, times: np.ndarray) -> np.ndarray:
        return np.stack([self.at(t) for t in np.asarray(times, dtype=float)])


class ObservableFamily:
    """Observable t -> A(t) with an explicit time derivative.

    When no analytic derivative is supplied, `derivative_on_grid` falls back
    to central finite differences (one-sided at the grid ends).
    """

    def __init__(self, matrix_fn: Callable[[float], np.ndarray], dimension: int,
                 derivative_fn: Optional[Callable[[float], np.ndarray]] = None,
                 time_dependent: bool = True, name: str = "observable"):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self._fn = matrix_fn
        self._dfn = derivative_fn
        self.dimension = int(dimension)
        self.time_dependent = bool(time_dependent)
        self.name = name

    @classmethod
    def constant(cls, matrix, name: str = "constant") -> "ObservableFamily":
        m = as_operator(matrix)
        z = np.zeros_like(m)
        return cls(lambda t: m, m.shape[0], lambda t: z, time_dependent=False, name=name)

    def at(self, t: float) -> np.ndarray:
        m = as_operator(self._fn(float(t)))
        if m.shape[0] != self.dimension:
            raise ValueError(f"observable '{self.name}' returned wrong dimension")
        return m

    def at_many(self, times: np.ndarray) -> np.ndarray:
        return np.stack([self.at(t) for t in np.asarray(times, dtype=float)])

    def derivative_on_grid(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self._dfn is not None:
            return np.stack([as_operator(self._dfn(float(t))) for t in times])
        values = self.at_many(times)
        out = np.empty_like(values)
        dt = np.diff(times)
        out[1:-1] = (values[2:] - values[:-2]) / (times[2:] - times[:-2])[:, None, None]
        if times.size >= 3:  # one-sided second-order ends
            out[0] = (-3 * values[0] + 4 * values[1] - values[2]) / (2 * dt[0])
            out[-1] = (3 * values[-1] - 4 * values[-2] + values[-3]) / (2 * dt[-1])
        else:
            out[0] = (values[1] - values[0]) / dt[0]
            out[-1] = (values[-1] - values[-2]) / dt[-1]
        return out


@dataclass(frozen=True)
class Trajectory:
    """State history on a strictly increasing time grid; one state per time."""

    times: np.ndarray
    states: np.ndarray  # (N, n)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=complex)
        if times.ndim != 1 or np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if states.shape[0] != times.shape[0]:
            raise ValueError("one state required per grid time")
        times.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def index_of(self, t: float) -> int:
        return grid_index(self.times, t)

    def state_at(self, t: float) -> np.ndarray:
        return self.states[self.index_of(t)]

    def norm_sq(self) -> np.ndarray:
        return np.einsum("ki,ki->k", self.states.conj(), self.states).real

    def norm_drift(self) -> float:
        norms = self.norm_sq()
        return float(np.max(np.abs(norms - norms[0])))


@dataclass(frozen=True)
class DensityTrajectory:
    """Density-operator history on a time grid."""

    times: np.ndarray
    matrices: np.ndarray  # (N, n, n)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        mats = np.asarray(self.matrices, dtype=complex)
        if mats.shape[0] != times.shape[0]:
            raise ValueError("one density matrix required per grid time")
        times.setflags(write=False)
        mats.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "matrices", mats)

    def matrix_at(self, t: float) -> np.ndarray:
        return self.matrices[grid_index(self.times, t)]


def grid_index(times: np.ndarray, t: float) -> int:
    """Index of `t` on the grid; raises OffGridTimeError if not grid aligned."""
    times = np.asarray(times, dtype=float)
    idx = int(np.argmin(np.abs(times - t)))
    spacing = float(np.min(np.diff(times))) if times.size > 1 else 1.0
    if abs(times[idx] - t) > 1e-6 * spacing:
        raise OffGridTimeError(f"time {t} is not on the sampling grid")
    return idx


def drift_budget(step: float, duration: float) -> float:
    """Conservative norm-squared drift allowance for the midpoint stepper.

    One part in 1e12 per step; the stepper is exactly unitary up to the
    matrix-exponential truncation, so observed drift sits far below this.
    """
    steps = max(1.0, duration / step)
    return max(1e-12, 1e-12 * steps)


def midpoint_propagators(matrix_at_many: Callable[[np.ndarray], np.ndarray],
                         times: np.ndarray,
                         constants: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    """Step propagators exp(-i h H(t + h/2) / hbar) for every grid interval.

    Shared by the conventional and the bundle integrators so that identical
    generator samples produce bitwise-identical steps.
    """
    times = np.asarray(times, dtype=float)
    mids = (times[:-1] + times[1:]) / 2.0
    h = np.diff(times)
    mats = matrix_at_many(mids)
    return matrix_exponential(-1j * h[:, None, None] * mats / constants.hbar)


def _hermitian_checked(family: HamiltonianFamily, tol: float = 1e-10
                       ) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap a family's sampler to enforce its declared Hermiticity."""

    def at_many(times: np.ndarray) -> np.ndarray:
        sampled = family.at_many(times)
        if family.hermitian_expected:
            dev = max_abs(sampled - np.swapaxes(sampled.conj(), -2, -1))
            if dev > tol * max(1.0, max_abs(sampled)):
                raise ValueError(
                    f"Hamiltonian family '{family.name}' flagged Hermitian "
                    f"deviates by {dev:.3e}")
        return sampled

    return at_many


def propagate_states(propagators: np.ndarray, psi0: np.ndarray) -> np.ndarray:
    """Apply step propagators sequentially; returns (N + 1, n) states."""
    states = np.empty((propagators.shape[0] + 1, psi0.shape[0]), dtype=complex)
    states[0] = psi0
    for k in range(propagators.shape[0]):
        states[k + 1] = propagators[k] @ states[k]
    return states


def conjugate_by(u: np.ndarray, x: np.ndarray, u_inv: np.ndarray) -> np.ndarray:
    """(u @ x) @ u_inv with a fixed association order.

    Both density-evolution routes go through this helper so that identical
    operands yield bitwise-identical results.
    """
    return (u @ x) @ u_inv


class PropagatorGrid:
    """Ordered step-propagator products over a fixed grid.

    Prefix products C[j] = E[j-1] ... E[0] give U(t_j, t_0); a two-time
    operator is U(t_j, t_i) = C[j] @ inv(C[i]), with the empty product at
    i == 0 short-circuited to C[j] itself.
    """

    def __init__(self, family: HamiltonianFamily, times: np.ndarray,
                 constants: PhysicalConstants = PhysicalConstants(),
                 hermitian_tol: float = 1e-10):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
            raise ValueError("times must be a strictly increasing grid with >= 2 points")
        steps = midpoint_propagators(_hermitian_checked(family, hermitian_tol),
                                     times, constants)

        n = family.dimension
        prefixes = np.empty((times.size, n, n), dtype=complex)
        prefixes[0] = np.eye(n, dtype=complex)
        for k in range(steps.shape[0]):
            prefixes[k + 1] = steps[k] @ prefixes[k]

        self.family = family
        self.constants = constants
        self.times = times
        self.step_matrices = steps
        self.prefixes = prefixes
        self.inverse_prefixes = np.linalg.inv(prefixes)
        for a in (self.times, self.step_matrices, self.prefixes, self.inverse_prefixes):
            a.setflags(write=False)

    @property
    def dimension(self) -> int:
        return self.family.dimension

    def index_of(self, t: float) -> int:
        return grid_index(self.times, t)

    def operator(self, j: int, i: int) -> np.ndarray:
        """U(t_j, t_i) between grid indices (either order)."""
        if i == 0:
            return self.prefixes[j]
        return self.prefixes[j] @ self.inverse_prefixes[i]

    def operator_between(self, t: float, s: float) -> np.ndarray:
        """U(t, s) for grid-aligned times."""
        return self.operator(self.index_of(t), self.index_of(s))

    def operators_from(self, i: int) -> np.ndarray:
        """All U(t_j, t_i) stacked over j."""
        if i == 0:
            return self.prefixes
        return self.prefixes @ self.inverse_prefixes[i]

    def operators_into(self, i: int) -> np.ndarray:
        """All U(t_i, t_j) stacked over j."""
        return self.prefixes[i] @ self.inverse_prefixes


def evolve_state(family: HamiltonianFamily, psi0, t0: float, t1: float, step: float,
                 constants: PhysicalConstants = PhysicalConstants()) -> Trajectory:
    """Integrate the Schrodinger equation i hbar dpsi/dt = H(t) psi."""
    psi0 = as_state(psi0)
    if psi0.shape[0] != family.dimension:
        raise ValueError("initial state dimension does not match the Hamiltonian family")
    if np.vdot(psi0, psi0).real == 0.0:
        raise ValueError("initial state must be nonzero")
    times = uniform_grid(t0, t1, _steps_from(t0, t1, step))
    props = midpoint_propagators(_hermitian_checked(family), times, constants)
    return Trajectory(times, propagate_states(props, psi0))


def evolution_operator(family: HamiltonianFamily, s: float, t: float, step: float,
                       constants: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    """Two-time evolution operator U(t, s); U(s, s) is the exact identity."""
    if not (step > 0 and np.isfinite(step)):
        raise ValueError(f"step must be a positive real, got {step}")
    if t == s:
        return np.eye(family.dimension, dtype=complex)
    lo, hi = (s, t) if s < t else (t, s)
    times = uniform_grid(lo, hi, _steps_from(lo, hi, step))
    grid = PropagatorGrid(family, times, constants)
    forward = grid.prefixes[-1]
    return forward if t > s else np.linalg.inv(forward)


def validate_density(rho, tol: float = 1e-8) -> np.ndarray:
    """Check Hermiticity, positive semidefiniteness, and unit trace to `tol`."""
    rho = as_operator(rho)
    scale = max(1.0, max_abs(rho))
    if max_abs(rho - rho.conj().T) > tol * scale:
        raise ValueError("density matrix is not Hermitian to tolerance")
    if float(np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2))) < -tol * scale:
        raise ValueError("density matrix is not positive semidefinite to tolerance")
    if abs(complex(np.trace(rho)) - 1.0) > tol * scale:
        raise ValueError("density matrix trace must be 1 to tolerance")
    return rho


def evolve_density(family: HamiltonianFamily, rho0, t0: float, t1: float, step: float,
                   constants: PhysicalConstants = PhysicalConstants(),
                   rho_tol: float = 1e-8) -> DensityTrajectory:
    """Evolve a density operator as rho(t) = U(t, t0) rho0 U(t, t0)^-1.

    The conjugation form inherits the exact grid composition of the step
    products and solves i hbar drho/dt = [H(t), rho(t)].
    """
    rho0 = validate_density(rho0, rho_tol)
    if rho0.shape[0] != family.dimension:
        raise ValueError("density dimension does not match the Hamiltonian family")
    times = uniform_grid(t0, t1, _steps_from(t0, t1, step))
    grid = PropagatorGrid(family, times, constants)
    mats = conjugate_by(grid.prefixes, rho0, grid.inverse_prefixes)
    return DensityTrajectory(times, mats)


def mean_value(a, psi) -> complex:
    """<psi|A psi> / <psi|psi>; invariant under rescaling of psi."""
    a = as_operator(a)
    psi = as_state(psi)
    if a.shape[0] != psi.shape[0]:
        raise ValueError("operator and state dimensions differ")
    norm_sq = np.vdot(psi, psi).real
    if norm_sq == 0.0:
        raise ValueError("mean value of the zero state is undefined")
    return complex(np.vdot(psi, a @ psi) / norm_sq)


def mean_value_density(a, rho) -> complex:
    """tr(rho A) / tr(rho); agrees with mean_value on pure projectors."""
    a = as_operator(a)
    rho = as_operator(rho)
    if a.shape != rho.shape:
        raise ValueError("operator and density dimensions differ")
    tr = complex(np.trace(rho))
    if tr == 0:
        raise ValueError("mean value for a trace-zero density is undefined")
    return complex(np.trace(rho @ a) / tr)
