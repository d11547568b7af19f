"""Dense complex linear algebra: Hermitian operators, eigendecompositions and
unitary exponentials.

All matrices are small (a few hundred rows at most) and stored densely.
Exponentials of Hermitian generators go through ``numpy.linalg.eigh``, which
is exact up to rounding for this class of matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotHermitianError, ValidationError

__all__ = [
    "HERMITIAN_TOL",
    "HermitianOperator",
    "EigenDecomposition",
    "as_complex_matrix",
    "eigendecompose",
    "evolve_exponential",
    "is_unitary",
    "frobenius",
]

HERMITIAN_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def frobenius(a) -> float:
    return float(np.linalg.norm(a, "fro"))


def as_complex_matrix(a) -> np.ndarray:
    """Validate ``a`` as a finite square matrix and return a complex copy."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValidationError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix contains NaN or Inf entries")
    return m


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A Hermitian matrix, symmetrised on construction.

    Inputs further than ``tol`` (Frobenius norm of ``A - A^H``) from
    Hermitian are rejected rather than silently symmetrised.
    """

    matrix: np.ndarray
    tol: float = HERMITIAN_TOL

    def __post_init__(self):
        m = as_complex_matrix(self.matrix)
        dev = frobenius(m - m.conj().T)
        if dev > self.tol:
            raise NotHermitianError(dev, self.tol)
        object.__setattr__(self, "matrix", _frozen(0.5 * (m + m.conj().T)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Ascending eigenvalues and orthonormal eigenvectors (as columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _frozen(np.asarray(self.eigenvalues, float)))
        object.__setattr__(self, "eigenvectors", _frozen(np.asarray(self.eigenvectors, complex)))

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def eigendecompose(op: HermitianOperator) -> EigenDecomposition:
    """Diagonalise ``op``; eigenvalues come back sorted ascending.

    >>> eigendecompose(HermitianOperator([[0, 1], [1, 0]])).eigenvalues
    array([-1.,  1.])
    """
    if not isinstance(op, HermitianOperator):
        op = HermitianOperator(op)
    w, v = np.linalg.eigh(op.matrix)
    return EigenDecomposition(w, v)


def evolve_exponential(op, t: float, hbar: float = 1.0, eig: EigenDecomposition | None = None) -> np.ndarray:
    """Return ``exp(-i op t / hbar)`` as a dense unitary matrix.

    ``eig`` may be passed to reuse a decomposition across many times.
    Negative ``t`` is allowed and gives the inverse evolution.
    """
    if not np.isfinite(t):
        raise ValidationError(f"time must be finite, got {t}")
    if eig is None:
        eig = eigendecompose(op)
    v = eig.eigenvectors
    phases = np.exp(-1j * eig.eigenvalues * (t / hbar))
    return (v * phases) @ v.conj().T


def is_unitary(u, tol: float = 1e-12) -> bool:
    u = np.asarray(u)
    return frobenius(u @ u.conj().T - np.eye(u.shape[0])) < tol
