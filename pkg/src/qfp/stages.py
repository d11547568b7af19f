"""Stage runners behind ``qfp run``.

Each runner takes a :class:`~qfp.scenario.Scenario` and returns a
:class:`StageResult` holding the tables to write, scalar diagnostics and the
invariant checks performed along the way.  Nothing here touches the file
system except reading CSV inputs named by the scenario.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .entropy import entropy_trace, shannon_entropy
from .errors import QFPError, ValidationError
from .fokker_planck import DensityOnGrid, solve_fokker_planck, stationary_fp
from .linalg import eigendecompose, evolve_exponential, frobenius
from .markov import (
    LatticeDiffusion,
    check_detailed_balance,
    communicating_blocks,
    gaussian_reference,
    generator_from_rates,
    integrate_master,
    solve_diffusion,
    stationary_distribution,
)
from .path_integral import (
    discretized_hamiltonian,
    free_particle_kernel,
    fp_kernel_propagate,
    spectral_propagator,
    trotter_propagator,
)
from .quantum import (
    DensityMatrix,
    ProbabilityVector,
    StateAmplitudes,
    UnitaryPropagator,
    decompose_probability,
    transition_matrix,
    transition_rates,
)
from .scenario import (
    Scenario,
    build_field,
    build_grid,
    build_potential,
    build_system,
    initial_amplitudes,
    initial_density_matrix,
    parse_vector,
)


@dataclass
class Table:
    header: list[str]
    rows: object

    def __len__(self):
        return len(self.rows)


@dataclass
class StageResult:
    tables: dict[str, Table] = field(default_factory=dict)
    kernels: dict[str, object] = field(default_factory=dict)
    summary: dict[str, float] = field(default_factory=dict)
    checks: dict[str, tuple[bool, float]] = field(default_factory=dict)

    def check(self, name: str, value: float, limit: float):
        self.checks[name] = (bool(value <= limit), float(value))
        self.summary[name] = float(value)

    @property
    def ok(self) -> bool:
        return all(ok for ok, _ in self.checks.values())


def _times(s: Scenario):
    t = s.float("numerics", "t")
    samples = s.int("numerics", "samples", 101)
    if samples < 2:
        raise ValidationError("[numerics] samples must be >= 2")
    return np.linspace(0.0, t, samples)


def _pure_state(s: Scenario, dim: int) -> np.ndarray:
    a = initial_amplitudes(s, dim)
    if a is None:
        raise ValidationError("this stage needs a pure initial state ([initial] basis or amplitudes)")
    return a


def run_evolve(s: Scenario) -> StageResult:
    sysm = build_system(s)
    a0 = _pure_state(s, sysm.h.dim)
    eig = eigendecompose(sysm.h)
    times = _times(s)
    rows, worst = [], 0.0
    for t in times:
        a = evolve_exponential(sysm.h, t, hbar=sysm.hbar, eig=eig) @ a0
        p = np.abs(a) ** 2
        worst = max(worst, abs(p.sum() - 1.0))
        rows.append([t, *p])
    res = StageResult()
    res.tables["probabilities"] = Table(["time"] + [f"P_{k}" for k in range(sysm.h.dim)], rows)
    res.check("normalization_residual", worst, 1e-12)
    for k, pk in enumerate(rows[-1][1:]):
        res.summary[f"final_P_{k}"] = float(pk)
    return res


def _markov_setup(s: Scenario):
    sysm = build_system(s)
    t = s.float("numerics", "t")
    steps = s.int("numerics", "steps", 100)
    dt = s.float("numerics", "dt", t / steps)
    u = UnitaryPropagator(evolve_exponential(sysm.h, dt, hbar=sysm.hbar), dt)
    tm = transition_matrix(u)
    w = transition_rates(tm)
    return sysm, u, tm, w, t, steps


def run_master(s: Scenario) -> StageResult:
    sysm, u, tm, w, t, steps = _markov_setup(s)
    a0 = _pure_state(s, sysm.h.dim)
    gen = generator_from_rates(w)
    traj = integrate_master(gen, ProbabilityVector(np.abs(a0) ** 2), t, steps)
    times = np.linspace(0.0, t, steps + 1)
    res = StageResult()
    n = sysm.h.dim
    res.tables["master_trajectory"] = Table(["time"] + [f"P_{k}" for k in range(n)], np.column_stack([times, traj]))
    res.tables["transition_matrix"] = Table([f"col_{j}" for j in range(n)], tm.t)
    res.tables["rates"] = Table([f"col_{j}" for j in range(n)], w.w)
    res.check("mass_residual", float(np.abs(traj.sum(axis=1) - 1).max()), 1e-9)
    res.check("min_probability_violation", float(max(0.0, -traj.min())), 1e-12)
    if len(communicating_blocks(gen.m)) == 1:
        pi = stationary_distribution(gen)
        _, viol = check_detailed_balance(w, pi)
        res.summary["detailed_balance_violation"] = viol
    return res


def run_diffusion(s: Scenario) -> StageResult:
    d = s.float("diffusion", "d", 1.0)
    l = s.float("diffusion", "spacing", 0.05)
    half = s.float("diffusion", "half_width", 10.0)
    periodic = s.bool("diffusion", "periodic", False)
    t = s.float("numerics", "t", 1.0)
    m = int(round(half / l))
    k = l * np.arange(-m, m + 1)
    p0 = np.zeros(k.size)
    p0[m] = 1.0
    if s.get("numerics", "steps") is not None:
        steps = s.int("numerics", "steps")
    else:
        # explicit stability ratio 0.25
        steps = max(1, int(np.ceil(t * 0.5 * d / (0.25 * l * l))))
    traj = solve_diffusion(LatticeDiffusion(d, l), p0, t, steps, periodic=periodic)
    dens = traj[-1] / l
    res = StageResult()
    res.tables["diffusion_profile"] = Table(["k", "density", "gaussian_reference"], [])
    if t > 0 and d > 0:
        ref = gaussian_reference(k, d * t)
        res.tables["diffusion_profile"].rows = np.column_stack([k, dens, ref])
        res.check("linf_rel_error", float(np.abs(dens - ref).max() / ref.max()), 0.01)
    else:
        res.tables["diffusion_profile"].rows = np.column_stack([k, dens, np.full(k.size, np.nan)])
    res.check("mass_residual", float(np.abs(traj.sum(axis=1) - 1).max()), 1e-9)
    res.summary["steps"] = float(steps)
    return res


def _fp_initial(s: Scenario, grid) -> DensityOnGrid:
    if s.get("initial", "delta_at") is not None:
        return DensityOnGrid.delta(grid, s.float("initial", "delta_at"))
    if s.get("initial", "gaussian") is not None:
        mean, var = parse_vector(s.require("initial", "gaussian"), float)
        return DensityOnGrid.gaussian(grid, mean, var)
    raise ValidationError("fp stage needs [initial] delta_at or gaussian = mean, var")


def run_fp(s: Scenario) -> StageResult:
    grid = build_grid(s, "grid")
    fld = build_field(s)
    p0 = _fp_initial(s, grid)
    t = s.float("numerics", "t")
    steps = s.int("numerics", "steps") if s.get("numerics", "steps") is not None else None
    scheme = s.get("numerics", "scheme", "auto")
    flux = s.get("numerics", "flux", "central")
    traj = solve_fokker_planck(grid, fld, p0, t, steps, scheme=scheme, flux=flux)
    res = StageResult()
    moments = []
    for tt, v in zip(traj.times, traj.values):
        dens = DensityOnGrid(grid, v)
        mean, var = dens.moments()
        moments.append([tt, dens.mass, mean, var])
    res.tables["fp_moments"] = Table(["time", "mass", "mean", "variance"], moments)
    cols, header = [grid.nodes, traj.values[-1]], ["k", "density"]
    if s.get("numerics", "kernel_slices") is not None:
        pk = fp_kernel_propagate(grid, fld, p0, t, s.int("numerics", "kernel_slices"))
        cols.append(pk.values)
        header.append("kernel_density")
        res.summary["kernel_vs_fd_l1"] = grid.integrate(np.abs(pk.values - traj.values[-1]))
    if not fld.time_dependent and s.bool("numerics", "stationary", True):
        try:
            st = stationary_fp(grid, fld)
        except QFPError:
            st = None
        if st is not None:
            cols.append(st.values)
            header.append("stationary")
            res.summary["l1_to_stationary"] = grid.integrate(np.abs(st.values - traj.values[-1]))
    res.tables["fp_final"] = Table(header, np.column_stack(cols))
    res.check("mass_residual", float(np.abs(traj.masses() - 1).max()), 1e-8)
    res.summary["final_mean"], res.summary["final_variance"] = moments[-1][2], moments[-1][3]
    res.summary["scheme_explicit"] = float(traj.scheme == "explicit")
    return res


def run_pathint(s: Scenario) -> StageResult:
    if s.get("system", "fixture") == "harmonic":
        sysm = build_system(s)
        grid, v, mass, hbar = sysm.grid, sysm.potential, sysm.mass, sysm.hbar
    else:
        grid = build_grid(s, "grid")
        mass = s.float("pathint", "mass", 1.0)
        hbar = s.float("system", "hbar", 1.0)
        v = build_potential(s, grid, mass)
    t = s.float("pathint", "t", 0.5)
    slices = [int(x) for x in parse_vector(s.get("pathint", "slices", "8 16 32 64"), float)]
    kinetic = s.get("pathint", "kinetic", "grid")
    eig = eigendecompose(discretized_hamiltonian(grid, v, mass, hbar))
    spectral = spectral_propagator(eig, t, grid, hbar)
    res = StageResult()
    rows, errs = [], []
    kern = None
    for n in slices:
        kern = trotter_propagator(grid, v, mass, t, n, hbar=hbar, kinetic=kinetic)
        err = float(np.abs(kern.k - spectral.k).max())
        errs.append(err)
        rows.append([n, err])
    res.tables["trotter_convergence"] = Table(["n_slices", "linf_error_vs_spectral"], rows)
    if len(errs) >= 2:
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:])) / np.log2(np.array(slices[1:]) / np.array(slices[:-1]))
        res.summary["measured_order"] = float(np.mean(orders))
    res.summary["final_error_vs_spectral"] = errs[-1]
    if not np.any(v.values):
        kf, ki = np.meshgrid(grid.nodes, grid.nodes, indexing="ij")
        res.summary["linf_error_vs_free_kernel"] = float(np.abs(kern.k - free_particle_kernel(kf, ki, t, mass, hbar)).max())
    res.kernels["kernel_trotter"] = kern
    res.kernels["kernel_spectral"] = spectral
    u = spectral.k * grid.dk
    res.check("spectral_unitarity", frobenius(u @ u.conj().T - np.eye(grid.n)), 1e-10)
    return res


def _entropy_table(tr):
    return Table(["time", "shannon", "von_neumann", "sigma_l1"], np.column_stack([tr.times, tr.shannon, tr.von_neumann, tr.sigma_l1]))


def run_entropy(s: Scenario) -> StageResult:
    sysm = build_system(s)
    rho0 = DensityMatrix(initial_density_matrix(s, sysm.h.dim))
    times = _times(s)
    tr = entropy_trace(sysm.h, rho0, times[-1], times.size, hbar=sysm.hbar)
    res = StageResult()
    res.tables["entropy_trace"] = _entropy_table(tr)
    res.check("von_neumann_deviation", float(np.abs(tr.von_neumann - tr.von_neumann[0]).max()), 1e-10)
    res.check("coarse_graining_violation", float(max(0.0, (tr.von_neumann - tr.shannon).max())), 1e-12)
    res.summary["final_shannon"] = float(tr.shannon[-1])
    res.summary["final_von_neumann"] = float(tr.von_neumann[-1])
    return res


def run_emergence(s: Scenario) -> StageResult:
    """Quantum dynamics -> transition matrix, rates and coherence residue ->
    master equation -> comparison with the exact occupations -> entropies."""
    sysm, u, tm, w, t, steps = _markov_setup(s)
    n = sysm.h.dim
    a = initial_amplitudes(s, n)
    if a is None:
        a = np.zeros(n, complex)
        a[n // 2] = 1.0
    a0 = StateAmplitudes(a)
    res = StageResult()
    res.tables["transition_matrix"] = Table([f"col_{j}" for j in range(n)], tm.t)
    res.tables["rates"] = Table([f"col_{j}" for j in range(n)], w.w)
    res.check("transition_row_sum_dev", float(np.abs(tm.t.sum(axis=1) - 1).max()), 1e-10)
    res.check("transition_col_sum_dev", float(np.abs(tm.t.sum(axis=0) - 1).max()), 1e-10)

    gen = generator_from_rates(w)
    p0 = ProbabilityVector(np.abs(a0.a) ** 2)
    master = integrate_master(gen, p0, steps * u.dt, steps)
    times = u.dt * np.arange(steps + 1)

    quantum = [p0.p]
    sig_rows = [[0.0, 0.0, *np.zeros(n)]]
    decomp_err = 0.0
    state = a0
    for i in range(1, steps + 1):
        markov, sigma = decompose_probability(u, state)
        state = StateAmplitudes.normalized(u.u @ state.a)
        p = np.abs(state.a) ** 2
        decomp_err = max(decomp_err, float(np.abs(markov + sigma.sigma - p).max()))
        quantum.append(p)
        sig_rows.append([times[i], sigma.l1, *sigma.sigma])
    quantum = np.array(quantum)
    res.tables["probabilities"] = Table(
        ["time"] + [f"quantum_{k}" for k in range(n)] + [f"master_{k}" for k in range(n)],
        np.column_stack([times, quantum, master]),
    )
    res.tables["sigma_trace"] = Table(["time", "sigma_l1"] + [f"sigma_{k}" for k in range(n)], sig_rows)
    res.check("decomposition_residual", decomp_err, 1e-12)
    res.check("master_mass_residual", float(np.abs(master.sum(axis=1) - 1).max()), 1e-9)
    res.summary["max_quantum_master_gap"] = float(np.abs(quantum - master).max())
    res.summary["max_sigma_l1"] = float(max(r[1] for r in sig_rows))

    tr = entropy_trace(sysm.h, DensityMatrix.pure(a0), times[-1], times.size, hbar=sysm.hbar)
    res.tables["entropy_trace"] = _entropy_table(tr)
    res.check("von_neumann_deviation", float(np.abs(tr.von_neumann - tr.von_neumann[0]).max()), 1e-10)
    res.check("coarse_graining_violation", float(max(0.0, (tr.von_neumann - tr.shannon).max())), 1e-12)
    res.summary["final_shannon_quantum"] = float(tr.shannon[-1])
    res.summary["final_shannon_master"] = shannon_entropy(ProbabilityVector(master[-1]))
    return res


RUNNERS = {
    "evolve": run_evolve,
    "master": run_master,
    "diffusion": run_diffusion,
    "fp": run_fp,
    "pathint": run_pathint,
    "entropy": run_entropy,
    "emergence": run_emergence,
}


def run_stage(s: Scenario) -> StageResult:
    return RUNNERS[s.stage](s)
