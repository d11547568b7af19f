"""Numerical laboratory for the passage from unitary Schroedinger dynamics to
classical master, diffusion and Fokker-Planck equations.

Modules
-------
linalg         Hermitian operators, eigendecompositions, unitary exponentials
quantum        amplitudes, propagator, transition matrix, coherence residue, rates
markov         master equation, detailed balance, lattice diffusion
fokker_planck  finite-difference Fokker-Planck solver and stationary densities
path_integral  Trotter/spectral propagators, Green function, FP kernels and actions
entropy        Shannon vs von Neumann entropy under coarse-graining
cli            ``qfp run`` scenario runner
"""

__version__ = "0.1.0"
