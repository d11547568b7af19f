"""How well does a product of sampled free short-time kernels reproduce the
free propagator on a truncated grid?

Each intermediate integral runs over a finite window with a non-decaying,
chirped integrand.  Two errors follow: the cut at the window edge (roughly
the integrand modulus over the local phase slope) and aliasing once the
phase advances by more than pi per node.  Neither shrinks with more slices,
so the interior error grows with N instead of vanishing.

    python3 scripts/free_kernel_study.py --half-widths 10 20 --dks 0.05 0.025
"""

import argparse

import numpy as np

from qfp.fokker_planck import Grid1D
from qfp.path_integral import PotentialOnGrid, free_particle_kernel, trotter_propagator


def interior_error(half, dk, n, t=1.0, inner=5.0):
    g = Grid1D.from_spacing(-half, half, dk)
    sel = np.abs(g.nodes) <= inner
    kf, ki = np.meshgrid(g.nodes[sel], g.nodes[sel], indexing="ij")
    kern = trotter_propagator(g, PotentialOnGrid.zero(g), 1.0, t, n).k[np.ix_(sel, sel)]
    return float(np.abs(kern - free_particle_kernel(kf, ki, t)).max())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--half-widths", type=float, nargs="+", default=[10.0, 20.0])
    ap.add_argument("--dks", type=float, nargs="+", default=[0.05, 0.025])
    ap.add_argument("--slices", type=int, nargs="+", default=[1, 2, 4, 8])
    args = ap.parse_args()
    print(f"{'half_width':>10s} {'dk':>8s} " + " ".join(f"{'N=' + str(n):>10s}" for n in args.slices))
    for half in args.half_widths:
        for dk in args.dks:
            errs = [interior_error(half, dk, n) for n in args.slices]
            print(f"{half:10g} {dk:8g} " + " ".join(f"{e:10.2e}" for e in errs))


if __name__ == "__main__":
    main()
