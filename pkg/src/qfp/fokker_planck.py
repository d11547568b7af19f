"""Finite-difference solver for the Fokker-Planck equation

    dP/dt = -d/dk [mu(k, t) P] + d^2/dk^2 [D(k, t) P]

with derivatives acting on the products mu P and D P (Ito form).

The discretisation is conservative: fluxes live on the midpoints between
nodes,

    F_{j+1/2} = (mu_j P_j + mu_{j+1} P_{j+1}) / 2 - ((DP)_{j+1} - (DP)_j) / dk,

and each node changes by the flux difference divided by its trapezoid
weight (dk inside, dk/2 at the two ends).  Zero flux through the ends makes
the trapezoid integral of P an exact invariant of the semi-discrete system.
Both the drift divergence and the diffusion term are centred and second
order; there is no upwinding, so strongly advective fields (cell Peclet
number |mu| dk / D > 2) can produce negative densities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import cumulative_trapezoid

from .errors import NumericalGuardError, ValidationError

__all__ = [
    "Grid1D",
    "DriftDiffusionField",
    "DensityOnGrid",
    "FPTrajectory",
    "solve_fokker_planck",
    "stationary_fp",
    "explicit_dt_limit",
    "ou_field",
    "double_well_field",
    "constant_field",
]

NEG_TOL = 1e-12
MASS_TOL = 1e-8


@dataclass(frozen=True)
class Grid1D:
    k_min: float
    k_max: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValidationError(f"grid needs at least 3 nodes, got {self.n}")
        if not self.k_max > self.k_min:
            raise ValidationError("grid bounds must satisfy k_min < k_max")

    @classmethod
    def from_spacing(cls, k_min: float, k_max: float, dk: float) -> "Grid1D":
        n = int(round((k_max - k_min) / dk)) + 1
        return cls(k_min, k_max, n)

    @property
    def dk(self) -> float:
        return (self.k_max - self.k_min) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.k_min, self.k_max, self.n)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(self.n, self.dk)
        w[0] = w[-1] = 0.5 * self.dk
        return w

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def index_of(self, k: float) -> int:
        return int(np.argmin(np.abs(self.nodes - k)))


def _sampler(value):
    if callable(value):
        return value
    arr = np.asarray(value, dtype=float)
    return lambda k, t: np.broadcast_to(arr, np.shape(k)) if arr.ndim == 0 else arr


@dataclass(frozen=True, eq=False)
class DriftDiffusionField:
    """Drift mu(k, t) and diffusion D(k, t).

    Each coefficient is a callable ``f(k, t)``, a scalar, or an array already
    sampled on the grid nodes.  ``time_dependent=False`` lets the solvers
    sample the field once.
    """

    mu: object
    dcoef: object
    time_dependent: bool = False

    @classmethod
    def from_table(cls, k, mu, d) -> "DriftDiffusionField":
        """Piecewise-linear interpolation of tabulated (k, mu, D) columns."""
        k = np.asarray(k, float)
        mu = np.asarray(mu, float)
        d = np.asarray(d, float)
        if not (k.shape == mu.shape == d.shape) or k.ndim != 1 or k.size < 2:
            raise ValidationError("table columns k, mu, D must be 1-D of equal length >= 2")
        if np.any(np.diff(k) <= 0):
            raise ValidationError("table k column must be strictly increasing")
        if np.any(d < 0):
            raise ValidationError("table contains negative diffusion coefficients")
        return cls(lambda x, t: np.interp(x, k, mu), lambda x, t: np.interp(x, k, d))

    def sample(self, grid: Grid1D, t: float = 0.0):
        k = grid.nodes
        mu = np.array(_sampler(self.mu)(k, t), dtype=float)
        d = np.array(_sampler(self.dcoef)(k, t), dtype=float)
        if mu.shape != k.shape or d.shape != k.shape:
            raise ValidationError("field does not match the grid size")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(d))):
            raise ValidationError(f"field is not finite on the grid at t={t}")
        if d.min() < 0:
            raise ValidationError(f"negative diffusion coefficient {d.min():.3e} sampled at t={t}")
        return mu, d


def ou_field(gamma: float = 1.0, d: float = 1.0) -> DriftDiffusionField:
    """Ornstein-Uhlenbeck: mu = -gamma k, constant D; stationary variance D/gamma."""
    return DriftDiffusionField(lambda k, t: -gamma * k, d)


def double_well_field(d: float = 0.25) -> DriftDiffusionField:
    """mu = -V'(k) for V = k^4/4 - k^2/2."""
    return DriftDiffusionField(lambda k, t: k - k**3, d)


def constant_field(mu: float = 0.0, d: float = 0.5) -> DriftDiffusionField:
    return DriftDiffusionField(mu, d)


@dataclass(frozen=True, eq=False)
class DensityOnGrid:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValidationError(f"density has shape {v.shape}, grid has {self.grid.n} nodes")
        if v.min() < -NEG_TOL:
            raise ValidationError(f"negative density {v.min():.3e}")
        v = np.where(v < 0, 0.0, v)
        mass = self.grid.integrate(v)
        if abs(mass - 1.0) > MASS_TOL:
            raise ValidationError(f"density integrates to {mass!r}, not 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def delta(cls, grid: Grid1D, k0: float = 0.0) -> "DensityOnGrid":
        """Unit mass on the node nearest ``k0``."""
        v = np.zeros(grid.n)
        j = grid.index_of(k0)
        v[j] = 1.0 / grid.weights[j]
        return cls(grid, v)

    @classmethod
    def gaussian(cls, grid: Grid1D, mean: float = 0.0, var: float = 1.0) -> "DensityOnGrid":
        k = grid.nodes
        v = np.exp(-((k - mean) ** 2) / (2 * var))
        return cls(grid, v / grid.integrate(v))

    @classmethod
    def normalized(cls, grid: Grid1D, values) -> "DensityOnGrid":
        v = np.asarray(values, float)
        return cls(grid, v / grid.integrate(v))

    @property
    def mass(self) -> float:
        return self.grid.integrate(self.values)

    def moments(self) -> tuple[float, float]:
        k = self.grid.nodes
        mean = self.grid.integrate(k * self.values)
        var = self.grid.integrate((k - mean) ** 2 * self.values)
        return mean, var


@dataclass
class FPTrajectory:
    grid: Grid1D
    times: np.ndarray
    values: np.ndarray
    scheme: str

    @property
    def final(self) -> DensityOnGrid:
        return DensityOnGrid(self.grid, self.values[-1])

    def masses(self) -> np.ndarray:
        return self.values @ self.grid.weights


def _bernoulli(x):
    # x / (e^x - 1), 1 at x = 0
    x = np.asarray(x, float)
    out = np.ones_like(x)
    nz = x != 0
    with np.errstate(over="ignore"):
        out[nz] = x[nz] / np.expm1(x[nz])
    return out


def _flux_coefficients(mu, d, dk, flux="central"):
    """Face flux F_{j+1/2} = a_j P_j + b_j P_{j+1}.

    ``"central"`` averages mu P and differences D P across the face.  It
    stays positive only while the cell Peclet number |mu| dk / D is below 2.
    ``"fitted"`` is the exponentially fitted (Scharfetter-Gummel) flux.  It
    matches central for small Peclet numbers, keeps a >= 0 >= b for any
    drift, and falls back to upwinding on faces without diffusion.
    """
    if flux == "central":
        return 0.5 * mu[:-1] + d[:-1] / dk, 0.5 * mu[1:] - d[1:] / dk
    if flux != "fitted":
        raise ValidationError(f"unknown flux {flux!r} (central or fitted)")
    mu_f = 0.5 * (mu[:-1] + mu[1:])
    d_f = 0.5 * (d[:-1] + d[1:])
    diffusive = d_f > 0
    pe = np.zeros_like(mu_f)
    pe[diffusive] = mu_f[diffusive] * dk / d_f[diffusive]
    a = d[:-1] / dk * _bernoulli(-pe)
    b = -d[1:] / dk * _bernoulli(pe)
    a = np.where(diffusive, a, np.maximum(mu_f, 0.0))
    b = np.where(diffusive, b, np.minimum(mu_f, 0.0))
    return a, b


def _rhs(p, mu, d, grid: Grid1D, flux="central"):
    a, b = _flux_coefficients(mu, d, grid.dk, flux)
    flux = a * p[:-1] + b * p[1:]
    div = np.zeros_like(p)
    div[:-1] += flux
    div[1:] -= flux
    return -div / grid.weights


def _banded_operator(mu, d, grid: Grid1D, flux="central"):
    """Tridiagonal matrix of the semi-discrete operator in LAPACK banded layout."""
    a, b = _flux_coefficients(mu, d, grid.dk, flux)
    w = grid.weights
    n = grid.n
    ab = np.zeros((3, n))
    # row 0: superdiagonal A[j, j+1] stored at ab[0, j+1]
    ab[0, 1:] = -b / w[:-1]
    # row 1: diagonal
    diag = np.zeros(n)
    diag[:-1] -= a
    diag[1:] += b
    ab[1] = diag / w
    # row 2: subdiagonal A[j+1, j] stored at ab[2, j]
    ab[2, :-1] = a / w[1:]
    return ab


def _apply_banded(ab, p):
    out = ab[1] * p
    out[:-1] += ab[0, 1:] * p[1:]
    out[1:] += ab[2, :-1] * p[:-1]
    return out


def explicit_dt_limit(mu, d, dk: float, flux: str = "central") -> float:
    """Largest stable forward-Euler step.

    Central flux: dk^2 / (2 max D + max|mu| dk).  Fitted flux: the step at
    which the first update weight would turn negative.
    """
    mu = np.asarray(mu, float)
    d = np.broadcast_to(np.asarray(d, float), mu.shape)
    if flux == "central":
        denom = 2.0 * float(np.max(d)) + float(np.max(np.abs(mu))) * dk
        return np.inf if denom == 0 else dk * dk / denom
    a, b = _flux_coefficients(mu, d, dk, flux)
    out = np.zeros(mu.size)
    out[:-1] += a
    out[1:] -= b
    w = np.full(mu.size, dk)
    w[0] = w[-1] = 0.5 * dk
    worst = float(np.max(out / w))
    return np.inf if worst == 0 else 1.0 / worst


def _check_density(p, t, hint=""):
    lo = p.min()
    if lo < -NEG_TOL:
        raise NumericalGuardError(f"negative density {lo:.3e} at t={t:.6g}; scheme unstable for this field{hint}")
    return np.where(p < 0, 0.0, p)


def solve_fokker_planck(
    grid: Grid1D,
    field: DriftDiffusionField,
    p0: DensityOnGrid,
    t: float,
    steps: int | None = None,
    scheme: str = "auto",
    save_every: int | None = None,
    flux: str = "central",
) -> FPTrajectory:
    """Advance the Fokker-Planck equation from ``p0`` over ``[0, t]``.

    ``scheme`` is ``"explicit"`` (forward Euler, refused when the step
    exceeds :func:`explicit_dt_limit`), ``"implicit"`` (trapezoidal in
    time, two backward-Euler half steps first to damp rough initial data)
    or ``"auto"`` (explicit when stable, else implicit).  ``steps=None``
    picks the smallest stable explicit step count.

    ``flux="fitted"`` swaps the centred face flux for an exponentially
    fitted one, for drift-dominated cells (|mu| dk / D > 2) where centred
    differences produce negative densities.

    Snapshots are kept every ``save_every`` steps (default: at most about
    500 snapshots), always including the first and last.
    """
    if p0.grid != grid:
        raise ValidationError("initial density lives on a different grid")
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    mu, d = field.sample(grid, 0.0)
    if flux not in ("central", "fitted"):
        raise ValidationError(f"unknown flux {flux!r} (central or fitted)")
    limit = explicit_dt_limit(mu, d, grid.dk, flux)
    if steps is None:
        steps = max(1, int(np.ceil(t / (0.9 * limit)))) if np.isfinite(limit) else 1
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    dt = t / steps
    if scheme == "auto":
        scheme = "explicit" if dt <= limit else "implicit"
    if scheme == "explicit" and dt > limit:
        need = int(np.ceil(t / limit))
        raise NumericalGuardError(
            f"explicit step dt={dt:.3g} exceeds stability limit {limit:.3g}; use at least {need} steps",
            suggestion=need,
        )
    if scheme not in ("explicit", "implicit"):
        raise ValidationError(f"unknown scheme {scheme!r}")
    if save_every is None:
        save_every = max(1, steps // 500)

    hint = ""
    if flux == "central" and np.any(d > 0):
        pe = float(np.max(np.abs(mu) * grid.dk / np.where(d > 0, d, np.inf)))
        if pe > 2:
            hint = f" (cell Peclet number {pe:.3g} > 2: refine dk or use flux='fitted')"

    p = np.array(p0.values)
    times, snaps = [0.0], [p.copy()]
    n = grid.n
    eye = np.zeros((3, n))
    eye[1] = 1.0

    def sample(tt):
        return field.sample(grid, tt) if field.time_dependent else (mu, d)

    def implicit_step(p, t0, h, theta):
        m0, d0 = sample(t0)
        m1, d1 = sample(t0 + h)
        rhs = p + (1 - theta) * h * _apply_banded(_banded_operator(m0, d0, grid, flux), p) if theta < 1 else p
        lhs = eye - theta * h * _banded_operator(m1, d1, grid, flux)
        return scipy.linalg.solve_banded((1, 1), lhs, rhs)

    for i in range(1, steps + 1):
        t0 = (i - 1) * dt
        if scheme == "explicit":
            m, dd = sample(t0)
            p = p + dt * _rhs(p, m, dd, grid, flux)
        elif i == 1:
            p = implicit_step(p, t0, 0.5 * dt, 1.0)
            p = implicit_step(p, t0 + 0.5 * dt, 0.5 * dt, 1.0)
        else:
            p = implicit_step(p, t0, dt, 0.5)
        p = _check_density(p, i * dt, hint)
        if i % save_every == 0 or i == steps:
            times.append(i * dt)
            snaps.append(p.copy())
    return FPTrajectory(grid, np.array(times), np.array(snaps), scheme)


def stationary_fp(grid: Grid1D, field: DriftDiffusionField, t: float = 0.0) -> DensityOnGrid:
    """Zero-flux stationary density mu P = d/dk (D P), i.e.

        P(k) proportional to exp(int_{k_min}^k mu/D dk') / D(k),

    with the integral done by the cumulative trapezoid rule.  Raises
    :class:`NumericalGuardError` when the drift pushes mass out through an
    end of the grid (the density then piles up against that end).
    """
    mu, d = field.sample(grid, t)
    if d.min() <= 0:
        raise ValidationError("stationary density needs D > 0 everywhere on the grid")
    expo = cumulative_trapezoid(mu / d, grid.nodes, initial=0.0)
    p = np.exp(expo - expo.max()) / d
    top = p.max()
    outward = (mu[0] < 0 and p[0] >= top * (1 - 1e-12)) or (mu[-1] > 0 and p[-1] >= top * (1 - 1e-12))
    if outward:
        raise NumericalGuardError("drift is not confining: stationary density piles up at the grid boundary")
    return DensityOnGrid(grid, p / grid.integrate(p))
