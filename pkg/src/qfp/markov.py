"""Classical layer: master equation, detailed balance and the lattice
diffusion limit.

Conventions
-----------
Generators act on column vectors of probabilities, ``dP/dt = M P``, with
``M[k, l]`` the rate for l -> k.  For a translation-invariant walk the
diffusion coefficient is ``D = 2 sum_j W_{k,k+j} (j l)^2`` and the diffusion
equation reads ``dP/dt = (D/2) d^2P/dk^2``.  The two factors of 2 cancel: a
nearest-neighbour walk with rate ``w`` per side has ``D = 2 w l^2`` and its
variance grows as ``D t``.  A unit-mass delta evolved with ``D = 1`` therefore
tracks ``exp(-k^2 / 2t) / sqrt(2 pi t)``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalGuardError, ReducibleGeneratorError, ValidationError
from .quantum import ProbabilityVector, RateMatrix

__all__ = [
    "MarkovGenerator",
    "StationaryDistribution",
    "LatticeDiffusion",
    "generator_from_rates",
    "integrate_master",
    "check_detailed_balance",
    "stationary_distribution",
    "relative_entropy",
    "lattice_diffusion_coefficient",
    "solve_diffusion",
    "gaussian_reference",
]

ZERO_RATE = 1e-14


@dataclass(frozen=True, eq=False)
class MarkovGenerator:
    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"generator must be square, got shape {m.shape}")
        off = m - np.diag(np.diag(m))
        if off.min() < -1e-12:
            raise ValidationError(f"generator has negative off-diagonal entry {off.min():.3e}")
        dev = np.abs(m.sum(axis=0)).max()
        if dev > 1e-10:
            raise ValidationError(f"generator columns do not sum to zero (max {dev:.2e})")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @property
    def dim(self) -> int:
        return self.m.shape[0]


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    pi: ProbabilityVector

    @property
    def p(self) -> np.ndarray:
        return self.pi.p


@dataclass(frozen=True)
class LatticeDiffusion:
    d: float
    spacing: float = 1.0

    def __post_init__(self):
        if not self.d >= 0:
            raise ValidationError(f"diffusion coefficient must be >= 0, got {self.d}")
        if not self.spacing > 0:
            raise ValidationError(f"lattice spacing must be > 0, got {self.spacing}")


def generator_from_rates(w: RateMatrix) -> MarkovGenerator:
    """M_kl = W_kl off the diagonal, M_kk = -sum_{l != k} W_lk (total escape rate)."""
    m = np.array(w.w, dtype=float)
    np.fill_diagonal(m, 0.0)
    np.fill_diagonal(m, -m.sum(axis=0))
    return MarkovGenerator(m)


def _as_prob(p) -> ProbabilityVector:
    return p if isinstance(p, ProbabilityVector) else ProbabilityVector(p)


def integrate_master(gen: MarkovGenerator, p0, t: float, steps: int, method: str = "expm") -> np.ndarray:
    """Integrate dP/dt = M P over [0, t] in ``steps`` equal steps.

    Returns an array of shape ``(steps + 1, dim)`` whose first row is ``p0``.

    ``method="expm"`` advances with the exact one-step propagator
    ``exp(M dt)`` (a stochastic matrix, so positivity and normalisation hold
    for any step size).  ``method="euler"`` is the plain forward difference
    ``P + dt M P``; it is refused when ``dt * max|M_kk| > 1`` because the
    update could then produce negative probabilities.
    """
    p0 = _as_prob(p0)
    if p0.dim != gen.dim:
        raise ValidationError(f"dimension mismatch: generator {gen.dim}, p0 {p0.dim}")
    if t < 0:
        raise ValidationError(f"integration time must be >= 0, got {t}")
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    dt = t / steps
    if method == "euler":
        escape = float(np.max(-np.diag(gen.m), initial=0.0))
        if dt * escape > 1.0:
            need = int(np.ceil(t * escape))
            raise NumericalGuardError(
                f"Euler step dt={dt:.3g} violates positivity guard dt*max|M_kk| <= 1; "
                f"use at least {need} steps",
                suggestion=need,
            )
        step = np.eye(gen.dim) + dt * gen.m
    elif method == "expm":
        step = scipy.linalg.expm(gen.m * dt)
    else:
        raise ValidationError(f"unknown method {method!r}")

    out = np.empty((steps + 1, gen.dim))
    out[0] = p0.p
    p = p0.p
    for i in range(1, steps + 1):
        p = step @ p
        p = np.where((p < 0) & (p > -1e-12), 0.0, p)
        out[i] = p
    if out.min() < -1e-12:
        raise NumericalGuardError(f"master integration produced negative probability {out.min():.3e}")
    return out


def check_detailed_balance(w: RateMatrix, pi, tol: float = 1e-12) -> tuple[bool, float]:
    """Return ``(balanced, max_kl |W_kl Pi_l - W_lk Pi_k|)``."""
    p = pi.p if isinstance(pi, StationaryDistribution) else np.asarray(getattr(pi, "p", pi), float)
    if p.shape[0] != w.dim:
        raise ValidationError(f"dimension mismatch: rates {w.dim}, distribution {p.shape[0]}")
    flux = w.w * p[None, :]
    viol = np.abs(flux - flux.T)
    np.fill_diagonal(viol, 0.0)
    worst = float(viol.max())
    return worst <= tol, worst


def communicating_blocks(m: np.ndarray) -> list[set[int]]:
    """Strongly connected components of the transition graph l -> k where
    ``|m[k, l]| > ZERO_RATE``, found by forward/backward breadth-first search."""
    n = m.shape[0]
    adj = np.abs(m) > ZERO_RATE
    np.fill_diagonal(adj, False)

    def reach(start, a):
        seen = {start}
        todo = deque([start])
        while todo:
            j = todo.popleft()
            for k in np.flatnonzero(a[:, j]):
                if k not in seen:
                    seen.add(int(k))
                    todo.append(int(k))
        return seen

    left = set(range(n))
    blocks = []
    while left:
        s = min(left)
        block = reach(s, adj) & reach(s, adj.T)
        blocks.append(block)
        left -= block
    return blocks


def stationary_distribution(gen: MarkovGenerator) -> StationaryDistribution:
    """Null vector of M, normalised.  Requires an irreducible generator."""
    blocks = communicating_blocks(gen.m)
    if len(blocks) > 1:
        raise ReducibleGeneratorError(blocks)
    n = gen.dim
    # Replace one balance equation by the normalisation constraint.
    a = np.array(gen.m)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    pi = np.where((pi < 0) & (pi > -1e-12), 0.0, pi)
    pi = pi / pi.sum()
    res = np.abs(gen.m @ pi).max()
    if res > 1e-8:
        raise NumericalGuardError(f"stationary solve residual {res:.2e} exceeds 1e-8")
    return StationaryDistribution(ProbabilityVector(pi))


def relative_entropy(p, q) -> float:
    """Kullback-Leibler divergence D(p || q) in nats."""
    p = np.asarray(getattr(p, "p", p), float)
    q = np.asarray(getattr(q, "p", q), float)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def lattice_diffusion_coefficient(w: RateMatrix, site: int, spacing: float = 1.0, tol: float = 1e-10) -> LatticeDiffusion:
    """D = 2 sum_{j>=1} W_{k,k+j} (j * spacing)^2 around ``site``.

    The walk must look translation invariant from ``site``: the rate of a
    hop of length j to the left equals that to the right, and the
    neighbouring sites (where they exist) see the same hop rates.
    """
    n = w.dim
    if not 0 <= site < n:
        raise ValidationError(f"site {site} outside lattice of {n} sites")
    wm = w.w

    def hop(k, j):
        return wm[k, k + j] if 0 <= k + j < n else None

    total = 0.0
    for j in range(1, n):
        right, left = hop(site, j), hop(site, -j)
        if right is not None and left is not None and abs(right - left) > tol:
            raise ValidationError(
                f"rates not symmetric at site {site}, hop {j}: {right} vs {left}"
            )
        r = right if right is not None else left
        if r is None:
            break
        for nb in (site - 1, site + 1):
            if 0 <= nb < n:
                for jj in (j, -j):
                    other = hop(nb, jj)
                    if other is not None and abs(other - r) > tol:
                        raise ValidationError(
                            f"rates not translation invariant near site {site}, hop {jj}"
                        )
        total += r * (j * spacing) ** 2
    return LatticeDiffusion(2.0 * total, spacing)


def _laplacian(p: np.ndarray, periodic: bool) -> np.ndarray:
    lap = np.empty_like(p)
    lap[1:-1] = p[2:] + p[:-2] - 2 * p[1:-1]
    if periodic:
        lap[0] = p[1] + p[-1] - 2 * p[0]
        lap[-1] = p[0] + p[-2] - 2 * p[-1]
    else:
        lap[0] = p[1] - p[0]
        lap[-1] = p[-2] - p[-1]
    return lap


def _laplacian_matrix(n: int, periodic: bool) -> np.ndarray:
    a = -2 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)
    if periodic:
        a[0, -1] = a[-1, 0] = 1.0
    else:
        a[0, 0] = a[-1, -1] = -1.0
    return a


def solve_diffusion(diff: LatticeDiffusion, p0, t: float, steps: int, periodic: bool = False, scheme: str = "auto") -> np.ndarray:
    """Advance dP/dt = (D/2) d^2P/dk^2 on a lattice of probabilities.

    ``p0`` holds site masses (summing to 1).  Boundaries are reflecting
    (no flux) unless ``periodic``.  With ``scheme="auto"`` the explicit
    forward-difference update is used when ``(D/2) dt / l^2 <= 1/2`` and
    the Crank-Nicolson (trapezoidal) update otherwise.

    Returns the trajectory, shape ``(steps + 1, n)``.
    """
    p = np.asarray(getattr(p0, "p", p0), dtype=float)
    n = p.shape[0]
    if n < 3:
        raise ValidationError(f"diffusion grid needs at least 3 sites, got {n}")
    if t < 0 or steps < 1:
        raise ValidationError("need t >= 0 and steps >= 1")
    dt = t / steps
    r = 0.5 * diff.d * dt / diff.spacing**2
    if scheme == "auto":
        scheme = "explicit" if r <= 0.5 else "implicit"
    if scheme == "explicit" and r > 0.5:
        need = int(np.ceil(diff.d * t / diff.spacing**2))
        raise NumericalGuardError(
            f"explicit diffusion step unstable (ratio {r:.3g} > 0.5); use at least {need} steps",
            suggestion=need,
        )

    out = np.empty((steps + 1, n))
    out[0] = p
    if scheme == "explicit":
        for i in range(1, steps + 1):
            p = p + r * _laplacian(p, periodic)
            out[i] = p
    elif scheme == "implicit":
        lap = _laplacian_matrix(n, periodic)
        lhs = np.eye(n) - 0.5 * r * lap
        rhs = np.eye(n) + 0.5 * r * lap
        lu = scipy.linalg.lu_factor(lhs)
        for i in range(1, steps + 1):
            p = scipy.linalg.lu_solve(lu, rhs @ p)
            out[i] = p
    else:
        raise ValidationError(f"unknown scheme {scheme!r}")
    return out


def gaussian_reference(k, t: float):
    """(2 pi t)^(-1/2) exp(-k^2 / 2t): the delta-start solution for D = 1."""
    if not t > 0:
        raise ValidationError(f"gaussian_reference needs t > 0, got {t}")
    k = np.asarray(k, dtype=float)
    return np.exp(-(k**2) / (2 * t)) / np.sqrt(2 * np.pi * t)
