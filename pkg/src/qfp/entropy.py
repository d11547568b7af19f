"""Shannon entropy of coarse-grained occupations versus von Neumann entropy.

Coarse-graining keeps only the diagonal of rho in the H0 eigenbasis.  Since
the diagonal of a Hermitian matrix is majorised by its spectrum,
``shannon(coarse_grain(rho)) >= von_neumann(rho)`` always holds, while the
von Neumann entropy itself is constant under unitary evolution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .linalg import HermitianOperator, eigendecompose, evolve_exponential
from .quantum import (
    DensityMatrix,
    ProbabilityVector,
    StateAmplitudes,
    UnitaryPropagator,
    decompose_probability,
)

EIG_FLOOR = 1e-14


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def shannon_entropy(p) -> float:
    """-sum P ln P in nats, with 0 ln 0 = 0."""
    if not isinstance(p, ProbabilityVector):
        p = ProbabilityVector(p)
    return _entropy(p.p)


def von_neumann_entropy(rho) -> float:
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    lam = np.linalg.eigvalsh(rho.rho)
    lam = np.where(lam < EIG_FLOOR, 0.0, lam)
    return _entropy(lam)


def coarse_grain(rho) -> ProbabilityVector:
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    return ProbabilityVector(np.diag(rho.rho).real)


@dataclass
class EntropyTrace:
    times: np.ndarray
    shannon: np.ndarray
    von_neumann: np.ndarray
    sigma_l1: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.times)
        if self.sigma_l1 is None:
            self.sigma_l1 = np.full(n, np.nan)
        if not (len(self.shannon) == len(self.von_neumann) == len(self.sigma_l1) == n):
            raise ValidationError("entropy trace columns have unequal lengths")

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "shannon", "von_neumann", "sigma_l1"])
            for row in zip(self.times, self.shannon, self.von_neumann, self.sigma_l1):
                w.writerow([f"{x:.17g}" for x in row])


def _pure_amplitudes(rho: DensityMatrix):
    w, v = np.linalg.eigh(rho.rho)
    if w[-1] < 1 - 1e-12:
        return None
    return StateAmplitudes.normalized(v[:, -1])


def entropy_trace(h, rho0, t_max: float, samples: int, hbar: float = 1.0) -> EntropyTrace:
    """Sample both entropies of rho(t) on ``samples`` equally spaced times in
    [0, t_max].

    When rho0 is pure, ``sigma_l1`` holds ||sigma||_1 of the one-interval
    step from the previous sample (0 at t = 0); otherwise it is NaN.
    """
    if samples < 2:
        raise ValidationError("entropy_trace needs at least two samples")
    if not isinstance(h, HermitianOperator):
        h = HermitianOperator(h)
    if not isinstance(rho0, DensityMatrix):
        rho0 = DensityMatrix(rho0)
    eig = eigendecompose(h)
    times = np.linspace(0.0, t_max, samples)
    dt = times[1] - times[0]
    step = UnitaryPropagator(evolve_exponential(h, dt, hbar=hbar, eig=eig), dt)
    amps = _pure_amplitudes(rho0)

    sh, vn, sig = [], [], []
    prev = amps
    for t in times:
        u = evolve_exponential(h, t, hbar=hbar, eig=eig)
        rho = DensityMatrix(u @ rho0.rho @ u.conj().T)
        sh.append(shannon_entropy(coarse_grain(rho)))
        vn.append(von_neumann_entropy(rho))
        if amps is None:
            sig.append(np.nan)
        elif t == 0.0:
            sig.append(0.0)
        else:
            _, sigma = decompose_probability(step, prev)
            sig.append(sigma.l1)
            prev = StateAmplitudes.normalized(u @ amps.a)
    return EntropyTrace(times, np.array(sh), np.array(vn), np.array(sig))
