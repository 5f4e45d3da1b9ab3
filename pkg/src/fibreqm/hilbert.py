"""Finite-dimensional complex Hilbert-space primitives.

Vectors are 1-D complex arrays, operators are square complex matrices.
All comparisons use the max-absolute-entry metric so tolerances are
dimension independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PhysicalConstants",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "adjoint",
    "as_operator",
    "as_state",
    "commutator",
    "inner_product",
    "is_hermitian",
    "is_unitary",
    "matrix_exponential",
    "max_abs",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a

SIGMA_X = _frozen(np.array([[0, 1], [1, 0]], dtype=complex))
SIGMA_Y = _frozen(np.array([[0, -1j], [1j, 0]], dtype=complex))
SIGMA_Z = _frozen(np.array([[1, 0], [0, -1]], dtype=complex))


@dataclass(frozen=True)
class PhysicalConstants:
    """Physical constants of a scenario; only the action scale for now."""

    hbar: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and np.isfinite(self.hbar)):
            raise ValueError(f"hbar must be a positive finite real, got {self.hbar}")


def as_state(v) -> np.ndarray:
    """Coerce to a 1-D complex state vector (dimension >= 1)."""
    a = np.asarray(v, dtype=complex)
    if a.ndim != 1 or a.shape[0] < 1:
        raise ValueError(f"state vector must be 1-D with dimension >= 1, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("state vector has non-finite entries")
    return a


def as_operator(a) -> np.ndarray:
    """Coerce to a square complex matrix."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"operator must be a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("operator has non-finite entries")
    return m


def max_abs(x) -> float:
    """Max-absolute-entry norm; 0 for empty input."""
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x)))


def inner_product(u, v) -> complex:
    """Hermitian scalar product, conjugate linear in the first argument."""
    u = as_state(u)
    v = as_state(v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    return complex(np.vdot(u, v))


def adjoint(a) -> np.ndarray:
    """Conjugate transpose, so <adjoint(A) u | v> = <u | A v>."""
    return as_operator(a).conj().T.copy()


def commutator(a, b) -> np.ndarray:
    """A @ B - B @ A."""
    a = as_operator(a)
    b = as_operator(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a @ b - b @ a


def is_hermitian(a, tol: float = 1e-12) -> bool:
    """True iff max-entry deviation from A = A^dagger is <= tol."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    a = as_operator(a)
    return max_abs(a - a.conj().T) <= tol


def is_unitary(a, tol: float = 1e-12) -> bool:
    """True iff max-entry deviation of A^dagger A from the identity is <= tol."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    a = as_operator(a)
    return max_abs(a.conj().T @ a - np.eye(a.shape[0])) <= tol


def matrix_exponential(a, max_terms: int = 64) -> np.ndarray:
    """Matrix exponential by scaling and squaring with an adaptive Taylor tail.

    Accepts a single matrix or a stacked batch (..., n, n); a batch shares one
    scaling exponent chosen from the largest entry.  The series is summed until
    the next term falls below 1e-18 of the running result, which keeps the
    truncation order well above 8 at the scaled norm.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2] or a.shape[-1] < 1:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix exponential of non-finite input")
    n = a.shape[-1]

    scale = max_abs(a) * n  # cheap bound on the induced infinity norm
    squarings = 0 if scale <= 0.5 else int(np.ceil(np.log2(scale / 0.5)))
    x = a / (2.0 ** squarings)

    eye = np.broadcast_to(np.eye(n, dtype=complex), a.shape)
    term = eye.copy()
    result = eye.copy()
    for k in range(1, max_terms + 1):
        term = term @ x / k
        result = result + term
        if max_abs(term) <= 1e-18 * max(1.0, max_abs(result)):
            break
    else:
        raise ValueError(f"matrix exponential series did not converge in {max_terms} terms")

    for _ in range(squarings):
        result = result @ result
    return result
