"""Quantum layer: amplitudes in the H0 eigenbasis, the unitary propagator and
the classical quantities extracted from it.

The central identity is the split of the exact occupation probabilities
after one propagator step,

    P_k(t) = sum_l T_kl P_l(0) + sigma_k,      T_kl = |U_kl|^2,

into a Markov part and an interference residue ``sigma``.  When ``sigma`` is
dropped, ``W = (T - I)/dt`` are the rates of a classical master equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, ValidationError
from .linalg import HermitianOperator, as_complex_matrix, evolve_exponential, frobenius

__all__ = [
    "StateAmplitudes",
    "UnitaryPropagator",
    "ProbabilityVector",
    "StochasticMatrix",
    "RateMatrix",
    "CoherenceVector",
    "DensityMatrix",
    "propagator",
    "evolve_amplitudes",
    "occupation_probabilities",
    "transition_matrix",
    "coherence_terms",
    "decompose_probability",
    "transition_rates",
    "evolve_density",
]

NORM_TOL = 1e-12
PROB_SUM_TOL = 1e-10
NEG_CLAMP = 1e-14


def _frozen(a) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StateAmplitudes:
    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex)
        if a.ndim != 1 or a.size == 0:
            raise ValidationError(f"amplitudes must be a non-empty vector, got shape {a.shape}")
        norm = float(np.vdot(a, a).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"amplitudes not normalised: sum |a_k|^2 = {norm!r}")
        object.__setattr__(self, "a", _frozen(a))

    @classmethod
    def normalized(cls, a) -> "StateAmplitudes":
        a = np.asarray(a, dtype=complex)
        return cls(a / np.linalg.norm(a))

    @classmethod
    def basis(cls, dim: int, index: int) -> "StateAmplitudes":
        a = np.zeros(dim, complex)
        a[index] = 1.0
        return cls(a)

    @property
    def dim(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True, eq=False)
class UnitaryPropagator:
    u: np.ndarray
    dt: float

    def __post_init__(self):
        u = as_complex_matrix(self.u)
        dev = frobenius(u @ u.conj().T - np.eye(u.shape[0]))
        if dev > NORM_TOL:
            raise ValidationError(f"propagator is not unitary: ||UU^H - I||_F = {dev:.3e}")
        object.__setattr__(self, "u", _frozen(u))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def dim(self) -> int:
        return self.u.shape[0]


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    """Occupation probabilities; floating-point dust below zero is clamped."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValidationError(f"probabilities must be a non-empty vector, got shape {p.shape}")
        if np.any(p < -NEG_CLAMP):
            raise ValidationError(f"negative probability {p.min():.3e}")
        p = np.where(p < 0, 0.0, p)
        s = p.sum()
        if abs(s - 1.0) > PROB_SUM_TOL:
            raise ValidationError(f"probabilities sum to {s!r}, not 1")
        object.__setattr__(self, "p", _frozen(p))

    @property
    def dim(self) -> int:
        return self.p.shape[0]


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Transition probabilities ``T[k, l]`` for l -> k over a span ``dt``."""

    t: np.ndarray
    dt: float

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValidationError(f"expected a square matrix, got shape {t.shape}")
        if t.min() < -1e-12 or t.max() > 1 + 1e-12:
            raise ValidationError("transition probabilities must lie in [0, 1]")
        rows = np.abs(t.sum(axis=1) - 1).max()
        cols = np.abs(t.sum(axis=0) - 1).max()
        if max(rows, cols) > PROB_SUM_TOL:
            raise ValidationError(
                f"matrix is not doubly stochastic (row dev {rows:.2e}, column dev {cols:.2e})"
            )
        object.__setattr__(self, "t", _frozen(t))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def dim(self) -> int:
        return self.t.shape[0]


@dataclass(frozen=True, eq=False)
class RateMatrix:
    """Transition rates ``W[k, l]`` (l -> k), columns summing to zero."""

    w: np.ndarray
    dt: float | None = None

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValidationError(f"expected a square matrix, got shape {w.shape}")
        off = w - np.diag(np.diag(w))
        if off.min() < -1e-12:
            raise ValidationError(f"negative off-diagonal rate {off.min():.3e}")
        dev = np.abs(w.sum(axis=0)).max()
        if dev > PROB_SUM_TOL:
            raise ValidationError(f"rate columns do not sum to zero (max {dev:.2e})")
        object.__setattr__(self, "w", _frozen(w))

    @classmethod
    def from_offdiagonal(cls, rates, dt=None) -> "RateMatrix":
        """Build a valid rate matrix from off-diagonal rates; the diagonal is
        set so every column sums to zero."""
        w = np.array(rates, dtype=float)
        np.fill_diagonal(w, 0.0)
        np.fill_diagonal(w, -w.sum(axis=0))
        return cls(w, dt)

    @property
    def dim(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True, eq=False)
class CoherenceVector:
    sigma: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float)
        if abs(s.sum()) > PROB_SUM_TOL:
            raise ConsistencyError(f"coherence terms sum to {s.sum():.3e}, expected 0")
        object.__setattr__(self, "sigma", _frozen(s))

    @property
    def l1(self) -> float:
        return float(np.abs(self.sigma).sum())


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    rho: np.ndarray

    def __post_init__(self):
        r = as_complex_matrix(self.rho)
        dev = frobenius(r - r.conj().T)
        if dev > NORM_TOL:
            raise ValidationError(f"density matrix not Hermitian (dev {dev:.2e})")
        r = 0.5 * (r + r.conj().T)
        tr = np.trace(r).real
        if abs(tr - 1.0) > NORM_TOL:
            raise ValidationError(f"density matrix trace is {tr!r}, not 1")
        lo = np.linalg.eigvalsh(r).min()
        if lo < -NORM_TOL:
            raise ValidationError(f"density matrix has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "rho", _frozen(r))

    @classmethod
    def pure(cls, state) -> "DensityMatrix":
        a = state.a if isinstance(state, StateAmplitudes) else np.asarray(state, complex)
        return cls(np.outer(a, a.conj()))

    @property
    def dim(self) -> int:
        return self.rho.shape[0]


def propagator(h, t: float, hbar: float = 1.0) -> UnitaryPropagator:
    """``U = exp(-i H t / hbar)`` wrapped with its time span."""
    if not isinstance(h, HermitianOperator):
        h = HermitianOperator(h)
    return UnitaryPropagator(evolve_exponential(h, t, hbar=hbar), t)


def _check_dims(u: UnitaryPropagator, n: int):
    if u.dim != n:
        raise ValidationError(f"dimension mismatch: propagator {u.dim}, state {n}")


def evolve_amplitudes(u: UnitaryPropagator, a0: StateAmplitudes) -> StateAmplitudes:
    """a_k(t) = sum_l U_kl a_l(0)."""
    _check_dims(u, a0.dim)
    return StateAmplitudes(u.u @ a0.a)


def occupation_probabilities(a: StateAmplitudes) -> ProbabilityVector:
    return ProbabilityVector(np.abs(a.a) ** 2)


def transition_matrix(u: UnitaryPropagator) -> StochasticMatrix:
    return StochasticMatrix(np.abs(u.u) ** 2, u.dt)


def coherence_terms(u: UnitaryPropagator, a: StateAmplitudes) -> CoherenceVector:
    """Interference residue sigma_k = sum_{l != m} U_kl U*_km a_l a*_m.

    Evaluated as |(U a)_k|^2 - sum_l |U_kl|^2 |a_l|^2, which equals the
    off-diagonal double sum exactly but costs O(n^2) instead of O(n^3).
    """
    _check_dims(u, a.dim)
    ua = u.u @ a.a
    full = ua * ua.conj()
    diag = (np.abs(u.u) ** 2) @ (np.abs(a.a) ** 2)
    sigma = full - diag
    resid = np.abs(sigma.imag).max()
    if resid > 1e-10:
        raise ConsistencyError(f"coherence terms have imaginary residue {resid:.3e}")
    return CoherenceVector(sigma.real)


def decompose_probability(u: UnitaryPropagator, a0: StateAmplitudes):
    """Split the exact P(t) into ``(T @ P(0), sigma)``."""
    _check_dims(u, a0.dim)
    p0 = np.abs(a0.a) ** 2
    markov = transition_matrix(u).t @ p0
    return markov, coherence_terms(u, a0)


def transition_rates(t: StochasticMatrix) -> RateMatrix:
    """W_kl = (T_kl - delta_kl) / dt."""
    if not t.dt > 0:
        raise ValidationError(f"transition rates need dt > 0, got {t.dt}")
    w = (t.t - np.eye(t.dim)) / t.dt
    return RateMatrix(w, t.dt)


def evolve_density(u: UnitaryPropagator, rho: DensityMatrix) -> DensityMatrix:
    """rho(t) = U rho U^H."""
    _check_dims(u, rho.dim)
    return DensityMatrix(u.u @ rho.rho @ u.u.conj().T)
