"""Bundle-side dynamics: evolution transport and bundle Hamiltonians.

The evolution transport along a path is the two-time fibre map

    U(t, s) = l(t)^-1 U_conv(t, s) l(s)

built over the shared sampling grid, and the matrix form of the bundle
Hamiltonian is

    Hm(t) = l^-1 H l - i hbar l^-1 (dl/dt)

(the second term is i hbar (d l^-1/dt) l rewritten through the exact identity
d(l^-1)/dt = -l^-1 (dl/dt) l^-1).  It is the unique generator for which the
lifted state of every conventional solution solves the bundle Schrodinger
equation i hbar dPsi/dt = Hm(t) Psi; that defining contract, not the formula,
is what the tests pin down.

The bundle integrator reuses the conventional exponential-midpoint stepper,
so integrator mismatch never contaminates equivalence measurements.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .bundle import SectionAlongPath, TrivializationFamily, _require_invertible
from .dynamics import (
    HamiltonianFamily,
    PropagatorGrid,
    grid_index,
    midpoint_propagators,
    propagate_states,
)
from .hilbert import PhysicalConstants, as_state, max_abs

__all__ = [
    "EvolutionTransport",
    "MatrixBundleHamiltonian",
    "TransportAxiomReport",
    "build_transport",
    "bundle_hamiltonian",
    "check_transport_axioms",
    "integrate_bundle_schrodinger",
    "matrix_bundle_hamiltonian",
    "transport_coefficients",
    "transport_section",
]


def bundle_hamiltonian(h: HamiltonianFamily, l: TrivializationFamily, t: float) -> np.ndarray:
    """Similarity conjugate l(t)^-1 H(t) l(t); spectrum equals that of H(t)."""
    lt = l.at(t)
    _require_invertible(lt, l.name, t)
    return np.linalg.solve(lt, h.at(t) @ lt)


def matrix_bundle_hamiltonian(h: HamiltonianFamily, l: TrivializationFamily, t: float,
                              constants: PhysicalConstants = PhysicalConstants(),
                              include_derivative_term: bool = True,
                              fd_step: Optional[float] = None) -> np.ndarray:
    """Generator of the bundle Schrodinger equation at time t.

    `include_derivative_term=False` drops the trivialization-derivative term;
    it exists only as a negative control for the check suite.
    """
    lt = l.at(t)
    _require_invertible(lt, l.name, t)
    conjugated = np.linalg.solve(lt, h.at(t) @ lt)
    if not include_derivative_term:
        return conjugated
    dl = l.derivative_at(t, fd_step)
    return conjugated - 1j * constants.hbar * np.linalg.solve(lt, dl)


class MatrixBundleHamiltonian:
    """Sampled matrix bundle Hamiltonian over a grid, evaluable at any time.

    The midpoint stepper needs values between grid points, so the closed form
    is kept callable; `matrices` holds the samples at the grid times.
    """

    def __init__(self, hamiltonian: HamiltonianFamily, trivialization: TrivializationFamily,
                 times, constants: PhysicalConstants = PhysicalConstants(),
                 include_derivative_term: bool = True):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
            raise ValueError("times must be a strictly increasing grid with >= 2 points")
        self.hamiltonian = hamiltonian
        self.trivialization = trivialization
        self.constants = constants
        self.include_derivative_term = bool(include_derivative_term)
        self.times = times
        self.times.setflags(write=False)
        self._fd_step = float(np.min(np.diff(times)))
        self._matrices: Optional[np.ndarray] = None

    @property
    def dimension(self) -> int:
        return self.hamiltonian.dimension

    def at(self, t: float) -> np.ndarray:
        return matrix_bundle_hamiltonian(
            self.hamiltonian, self.trivialization, t, self.constants,
            self.include_derivative_term, fd_step=self._fd_step)

    def at_many(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        l = self.trivialization
        values = l.at_many(times)
        _require_invertible(values, l.name, times)
        h_vals = self.hamiltonian.at_many(times)
        conjugated = np.linalg.solve(values, h_vals @ values)
        if not self.include_derivative_term:
            return conjugated
        dl = l.derivative_at_many(times, self._fd_step)
        return conjugated - 1j * self.constants.hbar * np.linalg.solve(values, dl)

    @property
    def matrices(self) -> np.ndarray:
        if self._matrices is None:
            self._matrices = self.at_many(self.times)
            self._matrices.setflags(write=False)
        return self._matrices


def transport_coefficients(hm: MatrixBundleHamiltonian, t: float,
                           hbar: Optional[float] = None) -> np.ndarray:
    """Coefficient matrix of the transport: -Hm(t) / (i hbar) = (i/hbar) Hm(t)."""
    hbar = hm.constants.hbar if hbar is None else float(hbar)
    if not hbar > 0:
        raise ValueError("hbar must be positive")
    return (1j / hbar) * hm.at(t)


class EvolutionTransport:
    """Two-time fibre transport U(t, s) on a grid, any order of arguments.

    Built from the conventional propagator products and the trivialization;
    queries off the grid are errors, never interpolations.
    """

    def __init__(self, propagators: PropagatorGrid, trivialization: TrivializationFamily):
        self.propagators = propagators
        self.trivialization = trivialization
        self.times = propagators.times
        values = trivialization.at_many(self.times)
        _require_invertible(values, trivialization.name, self.times)
        self.frames = values
        self.inverse_frames = np.linalg.inv(values)
        for a in (self.frames, self.inverse_frames):
            a.setflags(write=False)

    @property
    def dimension(self) -> int:
        return self.propagators.dimension

    @property
    def hermitian_generator(self) -> bool:
        return self.propagators.family.hermitian_expected

    def index_of(self, t: float) -> int:
        return grid_index(self.times, t)

    def matrix_by_index(self, j: int, i: int) -> np.ndarray:
        return self.inverse_frames[j] @ (self.propagators.operator(j, i) @ self.frames[i])

    def matrix(self, t: float, s: float) -> np.ndarray:
        """U(t, s): fibre(s) -> fibre(t) for grid-aligned times."""
        return self.matrix_by_index(self.index_of(t), self.index_of(s))

    def matrices_from(self, s: float) -> np.ndarray:
        """All U(t_j, s) stacked over the grid index j."""
        i = self.index_of(s)
        return self.inverse_frames @ (self.propagators.operators_from(i) @ self.frames[i])

    def matrices_into(self, t: float) -> np.ndarray:
        """All U(t, t_j) stacked over the grid index j."""
        j = self.index_of(t)
        return self.inverse_frames[j] @ (self.propagators.operators_into(j) @ self.frames)


def build_transport(h: HamiltonianFamily, l: TrivializationFamily, times,
                    constants: PhysicalConstants = PhysicalConstants(),
                    propagators: Optional[PropagatorGrid] = None) -> EvolutionTransport:
    """Evolution transport over `times`; pass `propagators` to share products."""
    if propagators is None:
        propagators = PropagatorGrid(h, np.asarray(times, dtype=float), constants)
    return EvolutionTransport(propagators, l)


def integrate_bundle_schrodinger(hm: MatrixBundleHamiltonian, psi0, t0: float, t1: float,
                                 step: float) -> SectionAlongPath:
    """Integrate i hbar dPsi/dt = Hm(t) Psi with the shared midpoint stepper.

    The grid implied by (t0, t1, step) must be the sampling grid of `hm`.
    """
    psi0 = as_state(psi0)
    if psi0.shape[0] != hm.dimension:
        raise ValueError("initial fibre vector dimension does not match")
    times = hm.times
    spacing = float(times[1] - times[0])
    if (abs(times[0] - t0) > 1e-9 * max(1.0, abs(t0))
            or abs(times[-1] - t1) > 1e-9 * max(1.0, abs(t1))
            or abs(spacing - step) > 1e-9 * step):
        raise ValueError("(t0, t1, step) does not match the sampling grid of the generator")
    props = midpoint_propagators(hm.at_many, times, hm.constants)
    return SectionAlongPath(times, propagate_states(props, psi0))


def transport_section(transport: EvolutionTransport, psi_s, s: float, t: float) -> np.ndarray:
    """Carry a fibre vector from the fibre at s to the fibre at t."""
    psi_s = as_state(psi_s)
    return transport.matrix(t, s) @ psi_s


@dataclass(frozen=True)
class TransportAxiomReport:
    """Measured deviations of a transport from the identity/composition axioms."""

    max_identity_deviation: float
    max_composition_deviation: float
    worst_identity_time: float
    worst_composition_triple: Tuple[float, float, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return (self.max_identity_deviation <= self.tolerance
                and self.max_composition_deviation <= self.tolerance)


def check_transport_axioms(transport: EvolutionTransport,
                           sample: Sequence[Tuple[float, float, float]],
                           tol: float) -> TransportAxiomReport:
    """Measure U(t,t) = I and U(t,s) U(s,r) = U(t,r) over sampled triples.

    Triples must be grid aligned with r <= s <= t; the identity axiom is
    checked at every time appearing in the sample.
    """
    eye = np.eye(transport.dimension, dtype=complex)
    id_dev, id_worst = -1.0, float(transport.times[0])
    comp_dev, comp_worst = -1.0, (0.0, 0.0, 0.0)
    seen_times = set()
    for (r, s, t) in sample:
        if not (r <= s <= t):
            raise ValueError(f"triple must satisfy r <= s <= t, got {(r, s, t)}")
        ir, isx, it = (transport.index_of(x) for x in (r, s, t))
        for x, ix in ((r, ir), (s, isx), (t, it)):
            if ix in seen_times:
                continue
            seen_times.add(ix)
            dev = max_abs(transport.matrix_by_index(ix, ix) - eye)
            if dev > id_dev:
                id_dev, id_worst = dev, float(x)
        composed = transport.matrix_by_index(it, isx) @ transport.matrix_by_index(isx, ir)
        dev = max_abs(composed - transport.matrix_by_index(it, ir))
        if dev > comp_dev:
            comp_dev, comp_worst = dev, (float(r), float(s), float(t))
    if id_dev < 0:
        raise ValueError("sample must contain at least one triple")
    return TransportAxiomReport(id_dev, comp_dev, id_worst, comp_worst, tol)
