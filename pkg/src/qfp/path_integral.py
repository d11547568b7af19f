"""Path-integral constructions on a grid.

Quantum side: the propagator K(k_f, t; k_i, 0) built three ways,

* ``trotter_propagator``: N short-time factors exp(-iT dt) exp(-iV dt)
  chained by N - 1 intermediate integrations (matrix products weighted by
  dk), potential evaluated at the earlier point of each slice;
* ``spectral_propagator``: sum_n exp(-i E_n t) psi_n(k) psi_n(k')^* / dk;
* ``free_particle_kernel``: the closed form for V = 0.

Stochastic side: the short-time Gaussian kernel of the Fokker-Planck
equation (obtained by integrating the response variable out of the
short-time action), its iteration, and the discretised response-variable
action itself.

Branch convention: ``sqrt(m / (2 pi i hbar t))`` uses the principal root,
``1/sqrt(i) = exp(-i pi/4)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NumericalGuardError, ValidationError
from .fokker_planck import DensityOnGrid, DriftDiffusionField, Grid1D
from .linalg import EigenDecomposition, HermitianOperator, evolve_exponential

__all__ = [
    "PotentialOnGrid",
    "PropagatorKernel",
    "GreenFunctionSample",
    "DiscretizedPath",
    "ResponsePath",
    "kinetic_operator",
    "discretized_hamiltonian",
    "short_time_matrix_element",
    "free_particle_kernel",
    "trotter_propagator",
    "spectral_propagator",
    "retarded_green_function",
    "green_scan",
    "quantum_action",
    "fp_short_time_kernel",
    "fp_transition_matrix",
    "fp_kernel_propagate",
    "msr_action",
]

_INV_SQRT_I = np.exp(-0.25j * np.pi)


@dataclass(frozen=True, eq=False)
class PotentialOnGrid:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValidationError(f"potential has shape {v.shape}, grid has {self.grid.n} nodes")
        if not np.all(np.isfinite(v)):
            raise ValidationError("potential is not finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid1D, f) -> "PotentialOnGrid":
        return cls(grid, f(grid.nodes))

    @classmethod
    def zero(cls, grid: Grid1D) -> "PotentialOnGrid":
        return cls(grid, np.zeros(grid.n))

    def interpolant(self):
        k, v = self.grid.nodes, self.values
        return lambda x: np.interp(x, k, v)


@dataclass(frozen=True, eq=False)
class PropagatorKernel:
    """K[i, j] = K(k_i, t; k_j, 0) on grid nodes, in units of 1/length."""

    grid: Grid1D
    k: np.ndarray
    t: float
    provenance: str

    def apply(self, psi) -> np.ndarray:
        """psi(k, t) = integral dk' K(k, t; k', 0) psi(k', 0) (rectangle rule)."""
        return self.grid.dk * (self.k @ np.asarray(psi))

    def to_csv(self, path):
        nodes = self.grid.nodes
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k_f", "k_i", "re_K", "im_K"])
            for i, kf in enumerate(nodes):
                for j, ki in enumerate(nodes):
                    z = self.k[i, j]
                    w.writerow([f"{kf:.17g}", f"{ki:.17g}", f"{z.real:.17g}", f"{z.imag:.17g}"])


@dataclass(frozen=True)
class GreenFunctionSample:
    e: float
    epsilon: float
    value: complex

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError(f"broadening epsilon must be > 0, got {self.epsilon}")


@dataclass(frozen=True, eq=False)
class DiscretizedPath:
    """Positions k_0 ... k_N at the slice boundaries, slices of length dt."""

    nodes: np.ndarray
    dt: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValidationError("a path needs at least two nodes (N >= 1 slices)")
        if not self.dt > 0:
            raise ValidationError(f"slice duration must be > 0, got {self.dt}")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def from_function(cls, f, t: float, n_slices: int) -> "DiscretizedPath":
        s = np.linspace(0.0, t, n_slices + 1)
        return cls(f(s), t / n_slices)

    @property
    def n_slices(self) -> int:
        return self.nodes.size - 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.nodes)


@dataclass(frozen=True, eq=False)
class ResponsePath:
    """Response variables k~_1 ... k~_N, one per slice (complex; the
    integration contour is the imaginary axis)."""

    nodes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.atleast_1d(np.asarray(self.nodes, dtype=complex)))


def kinetic_operator(grid: Grid1D, mass: float = 1.0, hbar: float = 1.0) -> np.ndarray:
    """-(hbar^2 / 2m) d^2/dk^2 by three-point differences, hard walls outside."""
    n, h = grid.n, grid.dk
    lap = (-2 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)) / h**2
    return -(hbar**2) / (2 * mass) * lap


def discretized_hamiltonian(grid: Grid1D, v: PotentialOnGrid, mass: float = 1.0, hbar: float = 1.0) -> HermitianOperator:
    return HermitianOperator(kinetic_operator(grid, mass, hbar) + np.diag(v.values))


def _check_mass_time(mass, dt, what="dt"):
    if not mass > 0:
        raise ValidationError(f"mass must be > 0, got {mass}")
    if not dt > 0:
        raise ValidationError(f"{what} must be > 0, got {dt}")


def short_time_matrix_element(k_next, k_prev, dt: float, v_prev=0.0, mass: float = 1.0, hbar: float = 1.0):
    """<k_next| exp(-iT dt/hbar) exp(-iV dt/hbar) |k_prev>

        = sqrt(m / (2 pi i hbar dt)) exp[(i/hbar)(m (k_next - k_prev)^2 / (2 dt) - V(k_prev) dt)].
    """
    _check_mass_time(mass, dt)
    k_next = np.asarray(k_next)
    k_prev = np.asarray(k_prev)
    pref = np.sqrt(mass / (2 * np.pi * hbar * dt)) * _INV_SQRT_I
    phase = (mass * (k_next - k_prev) ** 2 / (2 * dt) - np.asarray(v_prev) * dt) / hbar
    return pref * np.exp(1j * phase)


def free_particle_kernel(k_f, k_i, t: float, mass: float = 1.0, hbar: float = 1.0):
    """sqrt(m / (2 pi i hbar t)) exp(i m (k_f - k_i)^2 / (2 hbar t)).

    Accepts arrays; complex positions are allowed (useful for contour
    deformations in quadrature checks).
    """
    _check_mass_time(mass, t, "t")
    pref = np.sqrt(mass / (2 * np.pi * hbar * t)) * _INV_SQRT_I
    return pref * np.exp(1j * mass * (np.asarray(k_f) - np.asarray(k_i)) ** 2 / (2 * hbar * t))


def trotter_propagator(
    grid: Grid1D,
    v: PotentialOnGrid,
    mass: float,
    t: float,
    n_slices: int,
    hbar: float = 1.0,
    kinetic: str = "analytic",
) -> PropagatorKernel:
    """Trotter product of ``n_slices`` short-time factors on ``grid``.

    ``kinetic`` selects how <k'|exp(-iT dt)|k> is represented on the grid:

    ``"analytic"``
        the closed-form free kernel sampled at the nodes (the usual
        short-time matrix element).  Intermediate integrations over a
        truncated grid converge only while the kernel's chirp is resolved,
        i.e. roughly ``m |k' - k| dk / (hbar dt) < pi`` across the grid;
        for fine slicing the quadrature error grows without bound.
    ``"grid"``
        ``exp(-i T_h dt / hbar) / dk`` with ``T_h`` the three-point kinetic
        operator of :func:`discretized_hamiltonian`.  The product then
        converges (first order in dt) to the spectral propagator of the
        same discretised Hamiltonian.
    """
    if n_slices < 1:
        raise ValidationError(f"n_slices must be >= 1, got {n_slices}")
    if not mass > 0:
        raise ValidationError(f"mass must be > 0, got {mass}")
    if v.grid != grid:
        raise ValidationError("potential lives on a different grid")
    dk = grid.dk
    if t == 0:
        return PropagatorKernel(grid, np.eye(grid.n, dtype=complex) / dk, 0.0, "trotter")
    dt = t / n_slices
    nodes = grid.nodes
    if kinetic == "analytic":
        kn, kp = np.meshgrid(nodes, nodes, indexing="ij")
        slice_k = short_time_matrix_element(kn, kp, dt, v.values[None, :], mass, hbar)
    elif kinetic == "grid":
        t_op = HermitianOperator(kinetic_operator(grid, mass, hbar))
        slice_k = evolve_exponential(t_op, dt, hbar=hbar) / dk
        slice_k = slice_k * np.exp(-1j * v.values * dt / hbar)[None, :]
    else:
        raise ValidationError(f"unknown kinetic representation {kinetic!r}")

    kern = slice_k
    for _ in range(n_slices - 1):
        kern = slice_k @ (dk * kern)
    return PropagatorKernel(grid, kern, t, "trotter")


def spectral_propagator(eig: EigenDecomposition, t: float, grid: Grid1D, hbar: float = 1.0) -> PropagatorKernel:
    """K(k, t; k') = sum_n exp(-i E_n t / hbar) psi_n(k) psi_n(k')^* / dk.

    Eigenvectors are normalised as vectors, so dividing by dk turns the
    sum into a kernel with the density normalisation of the other routes.
    """
    if eig.dim != grid.n:
        raise ValidationError(f"eigendecomposition has dim {eig.dim}, grid has {grid.n} nodes")
    u = evolve_exponential(None, t, hbar=hbar, eig=eig)
    return PropagatorKernel(grid, u / grid.dk, t, "spectral")


def green_scan(eig: EigenDecomposition, k: int, k_prime: int, energies, epsilon: float) -> np.ndarray:
    """G_r(k, k', E) = sum_n psi_n(k) psi_n(k')^* / (E - E_n + i eps) on an
    array of energies.  ``k`` and ``k_prime`` are node indices; eigenvectors
    carry vector normalisation, so sum_n |psi_n(k)|^2 = 1."""
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be > 0, got {epsilon}")
    psi = eig.eigenvectors
    weights = psi[k, :] * psi[k_prime, :].conj()
    e = np.atleast_1d(np.asarray(energies, float))
    return (weights[None, :] / (e[:, None] - eig.eigenvalues[None, :] + 1j * epsilon)).sum(axis=1)


def retarded_green_function(eig: EigenDecomposition, k: int, k_prime: int, e: float, epsilon: float) -> GreenFunctionSample:
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be > 0, got {epsilon}")
    value = complex(green_scan(eig, k, k_prime, [e], epsilon)[0])
    return GreenFunctionSample(float(e), float(epsilon), value)


def quantum_action(path: DiscretizedPath, v, mass: float = 1.0) -> float:
    """sum_j [ (m/2) ((k_{j+1} - k_j)/dt)^2 - V(k_j) ] dt.

    ``v`` is a callable potential (e.g. ``PotentialOnGrid.interpolant()``)
    or ``None`` for V = 0.
    """
    k = path.nodes
    vel = np.diff(k) / path.dt
    pot = np.zeros(path.n_slices) if v is None else np.asarray(v(k[:-1]), float)
    return float(np.sum(0.5 * mass * vel**2 - pot) * path.dt)


def fp_short_time_kernel(mu: float, dcoef: float, eps: float):
    """Short-time Fokker-Planck transition density

        p(k_next | k_prev) = exp(-(k_next - k_prev - mu eps)^2 / (4 D eps)) / sqrt(4 pi D eps),

    i.e. mean shift mu eps and variance 2 D eps.
    """
    if not dcoef > 0:
        raise ValidationError(f"diffusion coefficient must be > 0, got {dcoef}")
    if not eps > 0:
        raise ValidationError(f"eps must be > 0, got {eps}")
    norm = 1.0 / np.sqrt(4 * np.pi * dcoef * eps)

    def kernel(k_prev, k_next):
        x = np.asarray(k_next) - np.asarray(k_prev) - mu * eps
        return norm * np.exp(-(x**2) / (4 * dcoef * eps))

    return kernel


def fp_transition_matrix(grid: Grid1D, mu, d, eps: float) -> np.ndarray:
    """A[i, j] = p(k_i | k_j) with mu, D frozen at the pre-point k_j.

    Columns are renormalised so the trapezoid integral over k_i is exactly
    one; this absorbs the Gaussian mass that falls outside the grid.
    """
    nodes = grid.nodes
    x = nodes[:, None] - nodes[None, :] - mu[None, :] * eps
    var2 = 4 * d[None, :] * eps
    a = np.exp(-(x**2) / var2)
    a /= grid.weights @ a
    return a


def fp_kernel_propagate(grid: Grid1D, field: DriftDiffusionField, p0: DensityOnGrid, t: float, n_slices: int) -> DensityOnGrid:
    """Propagate ``p0`` by ``n_slices`` applications of the short-time kernel
    with slice length ``eps = t / n_slices``.

    Refused when the kernel width sqrt(2 D eps) is below two grid spacings
    anywhere on the grid (the Gaussian would be undersampled).
    """
    if n_slices < 1:
        raise ValidationError(f"n_slices must be >= 1, got {n_slices}")
    if not t > 0:
        raise ValidationError(f"t must be > 0, got {t}")
    if p0.grid != grid:
        raise ValidationError("initial density lives on a different grid")
    eps = t / n_slices
    w = grid.weights

    def guard(d):
        d_min = float(d.min())
        if np.sqrt(2 * d_min * eps) < 2 * grid.dk * (1 - 1e-12):
            most = int(np.floor(t * d_min / (2 * grid.dk**2) * (1 + 1e-12)))
            raise NumericalGuardError(
                f"kernel width sqrt(2 D eps) = {np.sqrt(2 * d_min * eps):.3g} below 2 dk = {2 * grid.dk:.3g}; "
                f"use at most {most} slices or a finer grid",
                suggestion=most,
            )

    p = np.array(p0.values)
    if not field.time_dependent:
        mu, d = field.sample(grid, 0.0)
        guard(d)
        a = fp_transition_matrix(grid, mu, d, eps) * w[None, :]
        for _ in range(n_slices):
            p = a @ p
    else:
        for j in range(n_slices):
            mu, d = field.sample(grid, j * eps)
            guard(d)
            p = (fp_transition_matrix(grid, mu, d, eps) * w[None, :]) @ p
    mass = grid.integrate(p)
    if abs(mass - 1.0) > 1e-6:
        raise NumericalGuardError(f"kernel propagation lost normalisation: mass {mass!r}")
    return DensityOnGrid(grid, p / mass)


def msr_action(path: DiscretizedPath, response: ResponsePath, mu_fn, d_fn) -> complex:
    """sum_j [ k~_j mu(k_j) + k~_j^2 D(k_j) - k~_j (k_{j+1} - k_j)/dt ] dt,

    with the response variable of slice j paired with the increment
    k_j -> k_{j+1} and mu, D evaluated at the pre-point k_j.
    """
    r = response.nodes
    if r.size != path.n_slices:
        raise ValidationError(f"response path has {r.size} entries, path has {path.n_slices} slices")
    k = path.nodes[:-1]
    mu = np.asarray(mu_fn(k), dtype=float) * np.ones_like(k)
    d = np.asarray(d_fn(k), dtype=float) * np.ones_like(k)
    rate = path.increments / path.dt
    return complex(np.sum(r * mu + r**2 * d - r * rate) * path.dt)
