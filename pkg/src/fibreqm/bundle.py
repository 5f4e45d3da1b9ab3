"""Trivializations, lifts into fibres, and the Hilbert-module structure.

Fibres are represented in a fixed coordinate frame of dimension n.  A
trivialization family t -> l(t) is an invertible matrix mapping the fibre at
gamma(t) onto the typical fibre; it need not be unitary because the fibre
metric is induced through it:

    <u | v>_t = <l(t) u | l(t) v>

which makes every l(t) an isometry onto the typical fibre by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .hilbert import as_operator, as_state, matrix_exponential, max_abs

__all__ = [
    "GlobalSection",
    "MorphismAlongPath",
    "NonPointwiseOperatorError",
    "SectionAlongPath",
    "SingularTrivializationError",
    "TrivializationFamily",
    "basis_field",
    "bundle_adjoint_map",
    "bundle_adjoint_morphism",
    "constant_trivialization",
    "diagonal_phase_trivialization",
    "fibre_inner_product",
    "global_phase_trivialization",
    "identity_trivialization",
    "lift_operator",
    "lift_operator_on_grid",
    "lift_trajectory",
    "lift_vector",
    "module_combine",
    "morphism_as_section_operator",
    "random_smooth_unitary_trivialization",
    "section_inner",
    "section_operator_as_morphism",
]


class SingularTrivializationError(ValueError):
    """The trivialization is not invertible (to tolerance) where required."""


class NonPointwiseOperatorError(ValueError):
    """A section operator couples distinct grid times and admits no morphism."""


def _require_invertible(mats: np.ndarray, name: str, times, inv_tol: float = 1e-12) -> None:
    svals = np.linalg.svd(mats, compute_uv=False)
    ratios = svals[..., -1] / np.maximum(svals[..., 0], 1e-300)
    worst = int(np.argmin(ratios))
    if float(ratios.flat[worst]) < inv_tol:
        ts = np.atleast_1d(np.asarray(times, dtype=float))
        at = ts[worst] if ts.size == ratios.size else ts[0]
        raise SingularTrivializationError(f"trivialization '{name}' is singular at t={at:g}")


class TrivializationFamily:
    """Differentiable family t -> l(t) of invertible fibre-to-typical-fibre maps.

    An analytic derivative may be supplied; otherwise central finite
    differences with the grid spacing are used.  Batch evaluators let catalog
    families vectorize over whole grids.
    """

    def __init__(self, matrix_fn: Optional[Callable[[float], np.ndarray]], dimension: int,
                 derivative_fn: Optional[Callable[[float], np.ndarray]] = None,
                 batch_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 batch_derivative_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 fd_step: Optional[float] = None, name: str = "custom"):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        if matrix_fn is None and batch_fn is None:
            raise ValueError("need matrix_fn or batch_fn")
        self._fn = matrix_fn
        self._dfn = derivative_fn
        self._batch_fn = batch_fn
        self._batch_dfn = batch_derivative_fn
        self.dimension = int(dimension)
        self.fd_step = fd_step
        self.name = name

    @property
    def has_analytic_derivative(self) -> bool:
        return self._dfn is not None or self._batch_dfn is not None

    def at(self, t: float) -> np.ndarray:
        if self._fn is None:
            return self.at_many(np.array([float(t)]))[0]
        m = as_operator(self._fn(float(t)))
        if m.shape[0] != self.dimension:
            raise ValueError(f"trivialization '{self.name}' returned wrong dimension")
        return m

    def at_many(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if self._batch_fn is not None:
            return np.asarray(self._batch_fn(times), dtype=complex)
        return np.stack([self.at(t) for t in times])

    def derivative_at(self, t: float, fd_step: Optional[float] = None) -> np.ndarray:
        if self._dfn is not None:
            return as_operator(self._dfn(float(t)))
        if self._batch_dfn is not None:
            return np.asarray(self._batch_dfn(np.array([float(t)])), dtype=complex)[0]
        h = fd_step if fd_step is not None else self.fd_step
        if h is None or h <= 0:
            raise ValueError(
                f"trivialization '{self.name}' has no analytic derivative and no fd_step")
        return (self.at(t + h / 2) - self.at(t - h / 2)) / h

    def derivative_at_many(self, times, fd_step: Optional[float] = None) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if self._batch_dfn is not None:
            return np.asarray(self._batch_dfn(times), dtype=complex)
        return np.stack([self.derivative_at(t, fd_step) for t in times])

    def inverse_at(self, t: float) -> np.ndarray:
        m = self.at(t)
        _require_invertible(m, self.name, t)
        return np.linalg.inv(m)

    def validate_on_grid(self, times, inv_tol: float = 1e-8, fd_tol: float = 1e-3) -> None:
        """Check invertibility at every grid time and derivative consistency.

        The smallest singular value must stay >= inv_tol * largest at every
        grid time.  A supplied analytic derivative must match central finite
        differences of the values at interior grid points; the allowance is
        fd_tol (scaled) plus the finite-difference truncation floor estimated
        from the sampled third derivative, so correct derivatives pass on
        coarse grids while order-one mistakes are still caught.
        """
        times = np.asarray(times, dtype=float)
        values = self.at_many(times)
        _require_invertible(values, self.name, times, inv_tol)
        if self.has_analytic_derivative and times.size >= 3:
            supplied = self.derivative_at_many(times[1:-1])
            fd = (values[2:] - values[:-2]) / (times[2:] - times[:-2])[:, None, None]
            allowance = fd_tol * max(1.0, max_abs(supplied))
            if times.size >= 5:
                h = float(np.mean(np.diff(times)))
                third = (values[4:] - 2 * values[3:-1] + 2 * values[1:-3]
                         - values[:-4]) / (2 * h ** 3)
                allowance += (h * h / 6.0) * max_abs(third) * 4.0
            dev = max_abs(supplied - fd)
            if dev > allowance:
                raise ValueError(
                    f"trivialization '{self.name}': analytic derivative deviates from "
                    f"finite differences by {dev:.3e} (allowed {allowance:.3e})")


# --- catalog families ---------------------------------------------------

def identity_trivialization(dimension: int) -> TrivializationFamily:
    eye = np.eye(dimension, dtype=complex)
    zero = np.zeros_like(eye)
    return TrivializationFamily(
        lambda t: eye, dimension, lambda t: zero,
        batch_fn=lambda ts: np.broadcast_to(eye, (ts.size, dimension, dimension)).copy(),
        batch_derivative_fn=lambda ts: np.zeros((ts.size, dimension, dimension), dtype=complex),
        name="identity")


def global_phase_trivialization(dimension: int, omega: float) -> TrivializationFamily:
    eye = np.eye(dimension, dtype=complex)
    return TrivializationFamily(
        lambda t: np.exp(1j * omega * t) * eye, dimension,
        lambda t: 1j * omega * np.exp(1j * omega * t) * eye,
        batch_fn=lambda ts: np.exp(1j * omega * ts)[:, None, None] * eye,
        batch_derivative_fn=lambda ts: (1j * omega * np.exp(1j * omega * ts))[:, None, None] * eye,
        name="global-phase")


def diagonal_phase_trivialization(omegas: Sequence[float]) -> TrivializationFamily:
    freqs = np.asarray(omegas, dtype=float)
    if freqs.ndim != 1 or freqs.size < 1:
        raise ValueError("omegas must be a non-empty 1-D sequence")
    eye = np.eye(freqs.size)

    def batch(ts: np.ndarray) -> np.ndarray:
        return np.exp(1j * np.outer(ts, freqs))[:, :, None] * eye

    def batch_derivative(ts: np.ndarray) -> np.ndarray:
        return (1j * freqs * np.exp(1j * np.outer(ts, freqs)))[:, :, None] * eye

    return TrivializationFamily(
        lambda t: np.diag(np.exp(1j * freqs * t)), freqs.size,
        lambda t: np.diag(1j * freqs * np.exp(1j * freqs * t)),
        batch_fn=batch, batch_derivative_fn=batch_derivative, name="diagonal-phase")


def constant_trivialization(matrix, name: str = "constant") -> TrivializationFamily:
    m = as_operator(matrix)
    _require_invertible(m, name, 0.0)
    zero = np.zeros_like(m)
    return TrivializationFamily(
        lambda t: m, m.shape[0], lambda t: zero,
        batch_fn=lambda ts: np.broadcast_to(m, (ts.size,) + m.shape).copy(),
        batch_derivative_fn=lambda ts: np.zeros((ts.size,) + m.shape, dtype=complex),
        name=name)


def random_smooth_unitary_trivialization(dimension: int, seed: int, scale: float = 0.6,
                                         frequency: float = 2.5) -> TrivializationFamily:
    """Seeded smooth unitary family l(t) = exp(t K1) exp(sin(w t) K2).

    K1, K2 are anti-Hermitian, so every value is exactly unitary, and each
    factor is a single-generator exponential whose derivative is elementary;
    the product rule then gives the family's analytic derivative.
    """
    rng = np.random.default_rng([int(seed), 0x51])
    gens = []
    for _ in range(2):
        m = rng.normal(size=(dimension, dimension)) + 1j * rng.normal(size=(dimension, dimension))
        herm = (m + m.conj().T) / 2.0
        gens.append(1j * scale * herm / max(1.0, np.sqrt(dimension)))
    k1, k2 = gens

    def batch(ts: np.ndarray) -> np.ndarray:
        f1 = matrix_exponential(ts[:, None, None] * k1)
        f2 = matrix_exponential(np.sin(frequency * ts)[:, None, None] * k2)
        return f1 @ f2

    def batch_derivative(ts: np.ndarray) -> np.ndarray:
        f1 = matrix_exponential(ts[:, None, None] * k1)
        f2 = matrix_exponential(np.sin(frequency * ts)[:, None, None] * k2)
        rate = (frequency * np.cos(frequency * ts))[:, None, None]
        return (k1 @ f1) @ f2 + f1 @ (rate * (k2 @ f2))

    return TrivializationFamily(None, dimension, batch_fn=batch,
                                batch_derivative_fn=batch_derivative,
                                name="random-smooth-unitary")


# --- sections and morphisms along paths ----------------------------------

@dataclass(frozen=True)
class SectionAlongPath:
    """Fibre vectors keyed by the path parameter (never by the base point)."""

    times: np.ndarray
    values: np.ndarray  # (N, n)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if times.ndim != 1 or values.ndim != 2 or values.shape[0] != times.shape[0]:
            raise ValueError("need one fibre vector per grid time")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def value_at(self, t: float) -> np.ndarray:
        from .dynamics import grid_index
        return self.values[grid_index(self.times, t)]


@dataclass(frozen=True)
class MorphismAlongPath:
    """Fibre operators keyed by the path parameter."""

    times: np.ndarray
    matrices: np.ndarray  # (N, n, n)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        mats = np.asarray(self.matrices, dtype=complex)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2] or mats.shape[0] != times.shape[0]:
            raise ValueError("need one square fibre operator per grid time")
        times.setflags(write=False)
        mats.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "matrices", mats)

    @property
    def dimension(self) -> int:
        return self.matrices.shape[1]

    def matrix_at(self, t: float) -> np.ndarray:
        from .dynamics import grid_index
        return self.matrices[grid_index(self.times, t)]


def _same_grid(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape or not np.array_equal(a, b):
        raise ValueError("operands are sampled on different grids")


# --- lifting --------------------------------------------------------------

def lift_vector(l: TrivializationFamily, t: float, psi) -> np.ndarray:
    """l(t)^-1 psi: the fibre representative of a typical-fibre vector."""
    psi = as_state(psi)
    lt = l.at(t)
    _require_invertible(lt, l.name, t)
    return np.linalg.solve(lt, psi)


def lift_operator(l: TrivializationFamily, t: float, a) -> np.ndarray:
    """l(t)^-1 A l(t): the fibre morphism of a typical-fibre operator."""
    a = as_operator(a)
    lt = l.at(t)
    _require_invertible(lt, l.name, t)
    return np.linalg.solve(lt, a @ lt)


def lift_trajectory(l: TrivializationFamily, times, states) -> SectionAlongPath:
    """Lift a whole state history into the fibres with one batched solve."""
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=complex)
    mats = l.at_many(times)
    _require_invertible(mats, l.name, times)
    values = np.linalg.solve(mats, states[..., None])[..., 0]
    return SectionAlongPath(times, values)


def lift_operator_on_grid(l: TrivializationFamily, times, a) -> MorphismAlongPath:
    """Lift one operator (or a stack, one per time) at every grid time."""
    times = np.asarray(times, dtype=float)
    a = np.asarray(a, dtype=complex)
    mats = l.at_many(times)
    _require_invertible(mats, l.name, times)
    stacked = a if a.ndim == 3 else np.broadcast_to(a, mats.shape)
    return MorphismAlongPath(times, np.linalg.solve(mats, stacked @ mats))


# --- fibre metric and adjoints ---------------------------------------------

def fibre_inner_product(l: TrivializationFamily, t: float, u, v) -> complex:
    """<u|v>_t = <l(t) u | l(t) v>; positive definite for invertible l."""
    u = as_state(u)
    v = as_state(v)
    lt = l.at(t)
    _require_invertible(lt, l.name, t)
    return complex(np.vdot(lt @ u, lt @ v))


def bundle_adjoint_morphism(l: TrivializationFamily, t: float, a_fibre) -> np.ndarray:
    """Adjoint of a fibre morphism with respect to the fibre metric.

    Satisfies <adj(A) u | v>_t = <u | A v>_t; computed as
    l^-1 (l A l^-1)^dagger l.
    """
    a = as_operator(a_fibre)
    lt = l.at(t)
    _require_invertible(lt, l.name, t)
    lt_inv = np.linalg.inv(lt)
    return lt_inv @ (lt @ a @ lt_inv).conj().T @ lt


def bundle_adjoint_map(l: TrivializationFamily, s: float, t: float, a_map) -> np.ndarray:
    """Adjoint of a two-point fibre map A: fibre(t) -> fibre(s).

    Returns the map fibre(s) -> fibre(t) satisfying

        <adj(A) u | w>_t = <u | A w>_s   for u in fibre(s), w in fibre(t),

    computed as l_t^-1 (l_s A l_t^-1)^dagger l_s.  A two-point map is a
    unitary bundle map precisely when this adjoint equals its inverse.
    """
    a = as_operator(a_map)
    ls = l.at(s)
    lt = l.at(t)
    _require_invertible(ls, l.name, s)
    _require_invertible(lt, l.name, t)
    lt_inv = np.linalg.inv(lt)
    return lt_inv @ (ls @ a @ lt_inv).conj().T @ ls


def basis_field(l: TrivializationFamily, t: float, frame: Sequence) -> List[np.ndarray]:
    """Fibre basis e_a = l(t)^-1 f_a from a linearly independent frame."""
    vectors = [as_state(f) for f in frame]
    if not vectors:
        raise ValueError("frame must be non-empty")
    stacked = np.stack(vectors)
    svals = np.linalg.svd(stacked, compute_uv=False)
    if len(vectors) > vectors[0].shape[0] or svals[-1] <= 1e-12 * max(float(svals[0]), 1e-300):
        raise ValueError("frame is linearly dependent")
    lt = l.at(t)
    _require_invertible(lt, l.name, t)
    lifted = np.linalg.solve(lt, stacked.T).T
    return [lifted[k] for k in range(lifted.shape[0])]


# --- Hilbert-module structure on sections -----------------------------------

def module_combine(f, phi: SectionAlongPath, g, psi: SectionAlongPath) -> SectionAlongPath:
    """Pointwise combination t -> f(t) phi(t) + g(t) psi(t)."""
    _same_grid(phi.times, psi.times)
    f = np.broadcast_to(np.asarray(f, dtype=complex), phi.times.shape)
    g = np.broadcast_to(np.asarray(g, dtype=complex), psi.times.shape)
    return SectionAlongPath(phi.times, f[:, None] * phi.values + g[:, None] * psi.values)


def section_inner(l: TrivializationFamily, phi: SectionAlongPath,
                  psi: SectionAlongPath) -> np.ndarray:
    """Pointwise fibre scalar product of two sections; a complex grid field."""
    _same_grid(phi.times, psi.times)
    mats = l.at_many(phi.times)
    _require_invertible(mats, l.name, phi.times)
    y = np.einsum("kij,kj->ki", mats, phi.values)
    z = np.einsum("kij,kj->ki", mats, psi.values)
    return np.einsum("ki,ki->k", y.conj(), z)


def morphism_as_section_operator(a: MorphismAlongPath, phi: SectionAlongPath) -> SectionAlongPath:
    """Apply a morphism pointwise to a section: (A Phi)(t) = A(t) Phi(t)."""
    _same_grid(a.times, phi.times)
    return SectionAlongPath(phi.times, np.einsum("kij,kj->ki", a.matrices, phi.values))


def section_operator_as_morphism(op: Callable[[SectionAlongPath], SectionAlongPath],
                                 times, dimension: int) -> MorphismAlongPath:
    """Recover the morphism behind a pointwise section operator by probing.

    Probes with time-localized basis sections; any output support away from
    the probed grid time means the operator couples distinct times and has no
    morphism representation.
    """
    times = np.asarray(times, dtype=float)
    n = int(dimension)
    mats = np.zeros((times.size, n, n), dtype=complex)
    for k in range(times.size):
        for j in range(n):
            probe_values = np.zeros((times.size, n), dtype=complex)
            probe_values[k, j] = 1.0
            out = op(SectionAlongPath(times, probe_values))
            _same_grid(out.times, times)
            support = np.any(out.values != 0, axis=1)
            support[k] = False
            if np.any(support):
                raise NonPointwiseOperatorError(
                    f"section operator couples time {times[k]:g} to other grid times")
            mats[k, :, j] = out.values[k]
    return MorphismAlongPath(times, mats)


# --- global sections ---------------------------------------------------------

@dataclass(frozen=True)
class GlobalSection:
    """Point-indexed section x -> l_x^-1(phi); single-valued by construction.

    Only meaningful together with a point-indexed trivialization, and only
    restrictable along paths without self-intersections.
    """

    point_trivialization: Callable[[np.ndarray], np.ndarray]
    vector: np.ndarray

    def at_point(self, point) -> np.ndarray:
        lx = as_operator(self.point_trivialization(np.asarray(point, dtype=float)))
        return np.linalg.solve(lx, as_state(self.vector))

    def restrict_along(self, path, spatial_tol: float = 1e-9) -> SectionAlongPath:
        from .paths import self_intersections
        if self_intersections(path, spatial_tol):
            raise ValueError(
                "global sections are only restricted along paths without self-intersections")
        values = np.stack([self.at_point(path.points[k]) for k in range(path.grid.size)])
        return SectionAlongPath(path.grid, values)
