"""Refinement studies behind the numerical claims in the test suite.

Writes one CSV per study into --out (default: runs/convergence):

* diffusion_space.csv   lattice diffusion vs the unit Gaussian, spacing halved
* fp_space.csv          Fokker-Planck (OU) vs the exact transient, dk halved
* trotter_grid.csv      harmonic Trotter kernel (lattice kinetic) vs spectral
* fp_kernel_slices.csv  kernel iteration vs finite differences, slices doubled
"""

import argparse
from pathlib import Path

import numpy as np

from qfp.fokker_planck import DensityOnGrid, Grid1D, ou_field, solve_fokker_planck
from qfp.io import write_csv
from qfp.linalg import eigendecompose
from qfp.markov import LatticeDiffusion, gaussian_reference, solve_diffusion
from qfp.path_integral import (
    PotentialOnGrid,
    discretized_hamiltonian,
    fp_kernel_propagate,
    spectral_propagator,
    trotter_propagator,
)


def orders(x, err):
    x, err = np.asarray(x, float), np.asarray(err, float)
    out = np.full(err.size, np.nan)
    out[1:] = np.log(err[:-1] / err[1:]) / np.log(x[:-1] / x[1:])
    return np.abs(out)


def diffusion_space():
    rows = []
    for l in (0.4, 0.2, 0.1, 0.05, 0.025):
        k = np.arange(-round(10 / l), round(10 / l) + 1) * l
        p0 = np.zeros(k.size)
        p0[k.size // 2] = 1
        steps = int(np.ceil(0.5 / (0.25 * l * l)))
        dens = solve_diffusion(LatticeDiffusion(1.0, l), p0, 1.0, steps)[-1] / l
        ref = gaussian_reference(k, 1.0)
        rows.append([l, np.abs(dens - ref).max() / ref.max()])
    return ["spacing", "linf_rel_error"], rows


def ou_exact(k, t, m0=1.0, v0=0.25):
    m = m0 * np.exp(-t)
    v = v0 * np.exp(-2 * t) + 1 - np.exp(-2 * t)
    return np.exp(-((k - m) ** 2) / (2 * v)) / np.sqrt(2 * np.pi * v)


def fp_space():
    rows = []
    for h in (0.4, 0.2, 0.1, 0.05, 0.025):
        g = Grid1D.from_spacing(-8, 8, h)
        traj = solve_fokker_planck(g, ou_field(), DensityOnGrid(g, ou_exact(g.nodes, 0.0)), 0.5, 4000, scheme="implicit")
        err = traj.final.values - ou_exact(g.nodes, 0.5)
        rows.append([h, np.sqrt(g.integrate(err**2))])
    return ["dk", "l2_error"], rows


def trotter_grid():
    g = Grid1D(-8, 8, 64)
    v = PotentialOnGrid.from_function(g, lambda k: 0.5 * k**2)
    ref = spectral_propagator(eigendecompose(discretized_hamiltonian(g, v)), 0.5, g).k
    rows = [[n, np.abs(trotter_propagator(g, v, 1.0, 0.5, n, kinetic="grid").k - ref).max()] for n in (4, 8, 16, 32, 64, 128)]
    return ["n_slices", "linf_error"], rows


def fp_kernel_slices():
    g = Grid1D.from_spacing(-8, 8, 0.02)
    p0 = DensityOnGrid.delta(g, 1.0)
    fd = solve_fokker_planck(g, ou_field(), p0, 2.0).final.values
    rows = []
    for n in (125, 250, 500, 1000, 2000):
        kern = fp_kernel_propagate(g, ou_field(), p0, 2.0, n).values
        rows.append([n, g.integrate(np.abs(kern - fd))])
    return ["n_slices", "l1_vs_finite_difference"], rows


STUDIES = {
    "diffusion_space": diffusion_space,
    "fp_space": fp_space,
    "trotter_grid": trotter_grid,
    "fp_kernel_slices": fp_kernel_slices,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/convergence")
    ap.add_argument("--only", nargs="*", choices=sorted(STUDIES))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.only or STUDIES:
        header, rows = STUDIES[name]()
        x = [r[0] for r in rows]
        e = [r[1] for r in rows]
        rows = [[*r, o] for r, o in zip(rows, orders(x, e))]
        write_csv(out / f"{name}.csv", header + ["observed_order"], rows)
        print(f"{name}:")
        for r in rows:
            print("   " + "  ".join(f"{v:12.5g}" for v in r))


if __name__ == "__main__":
    main()
