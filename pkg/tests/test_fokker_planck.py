import numpy as np
import pytest
from scipy.integrate import quad

from qfp.errors import NumericalGuardError, ValidationError
from qfp.fokker_planck import (
    DensityOnGrid,
    DriftDiffusionField,
    Grid1D,
    constant_field,
    double_well_field,
    explicit_dt_limit,
    ou_field,
    solve_fokker_planck,
    stationary_fp,
)
from qfp.markov import LatticeDiffusion, gaussian_reference, solve_diffusion


def ou_transient(k, t, m0, v0, gamma=1.0, d=1.0):
    """Exact OU density from a Gaussian start, for dP/dt = d(gamma k P) + D P''."""
    m = m0 * np.exp(-gamma * t)
    v = v0 * np.exp(-2 * gamma * t) + (d / gamma) * (1 - np.exp(-2 * gamma * t))
    return np.exp(-((k - m) ** 2) / (2 * v)) / np.sqrt(2 * np.pi * v)


def test_grid_basics():
    g = Grid1D(-1.0, 1.0, 5)
    assert g.dk == 0.5
    np.testing.assert_allclose(g.nodes, [-1, -0.5, 0, 0.5, 1])
    assert g.integrate(np.ones(5)) == pytest.approx(2.0)
    assert Grid1D.from_spacing(-1, 1, 0.25).n == 9
    with pytest.raises(ValidationError):
        Grid1D(0, 1, 2)
    with pytest.raises(ValidationError):
        Grid1D(1, 0, 5)


def test_density_validation():
    g = Grid1D(-1.0, 1.0, 5)
    with pytest.raises(ValidationError):
        DensityOnGrid(g, np.ones(5))
    with pytest.raises(ValidationError):
        DensityOnGrid(g, [0, 2.5, -0.5, 0, 0])
    assert DensityOnGrid.delta(g, 0.0).mass == pytest.approx(1.0)
    assert DensityOnGrid.delta(g, 1.0).mass == pytest.approx(1.0)


def test_negative_diffusion_rejected():
    g = Grid1D(-1, 1, 11)
    fld = DriftDiffusionField(0.0, lambda k, t: k)
    with pytest.raises(ValidationError):
        solve_fokker_planck(g, fld, DensityOnGrid.delta(g), 1.0, 10)


def test_no_drift_no_diffusion_is_static():
    g = Grid1D(-3, 3, 61)
    p0 = DensityOnGrid.gaussian(g, 0.5, 0.3)
    traj = solve_fokker_planck(g, constant_field(0.0, 0.0), p0, 2.0, 10)
    np.testing.assert_array_equal(traj.values[-1], p0.values)


def test_pure_diffusion_gives_reference_gaussian():
    g = Grid1D.from_spacing(-10, 10, 0.05)
    traj = solve_fokker_planck(g, constant_field(0.0, 0.5), DensityOnGrid.delta(g), 1.0)
    ref = gaussian_reference(g.nodes, 1.0)
    assert np.abs(traj.final.values - ref).max() / ref.max() < 0.01


def test_explicit_guard_and_auto_fallback():
    g = Grid1D.from_spacing(-5, 5, 0.05)
    p0 = DensityOnGrid.gaussian(g, 0.0, 0.5)
    with pytest.raises(NumericalGuardError) as exc:
        solve_fokker_planck(g, ou_field(), p0, 1.0, 10, scheme="explicit")
    assert exc.value.suggestion > 10
    traj = solve_fokker_planck(g, ou_field(), p0, 1.0, 10)
    assert traj.scheme == "implicit"
    ref = ou_transient(g.nodes, 1.0, 0.0, 0.5)
    assert g.integrate(np.abs(traj.final.values - ref)) < 5e-3


@pytest.mark.parametrize("field", [ou_field(), double_well_field(), constant_field(0.3, 0.2)], ids=["ou", "double-well", "drift"])
@pytest.mark.parametrize("scheme", ["explicit", "implicit"])
@pytest.mark.parametrize("flux", ["central", "fitted"])
def test_conservation(field, scheme, flux):
    # |k| <= 2.2 keeps the double-well cell Peclet number below 2 at dk = 0.05
    g = Grid1D.from_spacing(-2.2, 2.2, 0.05)
    mu, d = field.sample(g)
    limit = explicit_dt_limit(mu, d, g.dk, flux)
    # trapezoidal stepping stays positive only up to about twice the explicit limit
    steps = int(np.ceil(1.5 / limit)) if scheme == "explicit" else int(np.ceil(1.5 / (2 * limit)))
    traj = solve_fokker_planck(g, field, DensityOnGrid.gaussian(g, 0.4, 0.2), 1.5, steps, scheme=scheme, flux=flux)
    assert np.abs(traj.masses() - 1).max() < 1e-8
    assert traj.values.min() >= 0


def test_drift_dominated_cells_need_fitted_flux():
    g = Grid1D.from_spacing(-3, 3, 0.05)  # Peclet number 4.8 at the edges
    p0 = DensityOnGrid.gaussian(g, 0.4, 0.2)
    with pytest.raises(NumericalGuardError, match="Peclet"):
        solve_fokker_planck(g, double_well_field(), p0, 1.5)
    traj = solve_fokker_planck(g, double_well_field(), p0, 1.5, flux="fitted")
    assert np.abs(traj.masses() - 1).max() < 1e-8
    assert traj.values.min() >= 0


def test_fitted_flux_matches_central_when_diffusive():
    g = Grid1D.from_spacing(-8, 8, 0.05)
    p0 = DensityOnGrid.gaussian(g, 1.0, 0.25)
    a = solve_fokker_planck(g, ou_field(), p0, 0.5, 400, scheme="implicit").final.values
    b = solve_fokker_planck(g, ou_field(), p0, 0.5, 400, scheme="implicit", flux="fitted").final.values
    ref = ou_transient(g.nodes, 0.5, 1.0, 0.25)
    assert g.integrate(np.abs(a - b)) < 1e-3
    assert g.integrate(np.abs(b - ref)) < 1e-3
    with pytest.raises(ValidationError):
        solve_fokker_planck(g, ou_field(), p0, 0.5, 10, flux="upwind")


def test_time_dependent_field_conserves():
    g = Grid1D.from_spacing(-4, 4, 0.05)
    fld = DriftDiffusionField(lambda k, t: -k + np.sin(3 * t), lambda k, t: 0.5 + 0.2 * np.cos(t) + 0.1 * k**2 / 16, time_dependent=True)
    traj = solve_fokker_planck(g, fld, DensityOnGrid.gaussian(g, 0.0, 0.3), 2.0)
    assert np.abs(traj.masses() - 1).max() < 1e-8


def test_matches_diffusion_solver_with_halved_coefficient():
    l = 0.05
    g = Grid1D.from_spacing(-6, 6, l)
    p0 = DensityOnGrid.delta(g, 0.0)
    steps = 400
    fp = solve_fokker_planck(g, constant_field(0.0, 0.5), p0, 1.0, steps, scheme="explicit")
    lattice = solve_diffusion(LatticeDiffusion(1.0, l), p0.values * g.weights, 1.0, steps)
    assert np.abs(fp.values[-1] - lattice[-1] / l).max() < 1e-6


def test_ou_long_time_variance():
    g = Grid1D.from_spacing(-8, 8, 0.05)
    traj = solve_fokker_planck(g, ou_field(1.0, 1.0), DensityOnGrid.delta(g, 1.0), 12.0)
    _, var = traj.final.moments()
    assert var == pytest.approx(1.0, rel=0.01)


def test_spatial_order_on_ou_transient():
    # fine trapezoidal time steps so the spatial error dominates
    errs = []
    for h in (0.2, 0.1, 0.05):
        g = Grid1D.from_spacing(-8, 8, h)
        p0 = DensityOnGrid(g, ou_transient(g.nodes, 0.0, 1.0, 0.25))
        traj = solve_fokker_planck(g, ou_field(), p0, 0.5, 4000, scheme="implicit")
        ref = ou_transient(g.nodes, 0.5, 1.0, 0.25)
        errs.append(np.sqrt(g.integrate((traj.final.values - ref) ** 2)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.2), orders


def test_temporal_order_explicit():
    g = Grid1D.from_spacing(-6, 6, 0.2)
    p0 = DensityOnGrid.gaussian(g, 1.0, 0.25)
    ref = solve_fokker_planck(g, ou_field(), p0, 0.5, 3200, scheme="explicit").final.values
    errs = [
        np.abs(solve_fokker_planck(g, ou_field(), p0, 0.5, n, scheme="explicit").final.values - ref).max()
        for n in (50, 100, 200)
    ]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 0.9), orders


def test_stationary_uniform_without_drift():
    g = Grid1D(-2, 2, 41)
    st = stationary_fp(g, constant_field(0.0, 0.7))
    np.testing.assert_allclose(st.values, np.full(41, 0.25), atol=1e-14)


def test_stationary_ou_gaussian():
    g = Grid1D.from_spacing(-8, 8, 0.02)
    st = stationary_fp(g, ou_field(1.0, 1.0))
    mean, var = st.moments()
    assert abs(mean) < 1e-12
    assert var == pytest.approx(1.0, rel=1e-3)
    ref = np.exp(-g.nodes**2 / 2) / np.sqrt(2 * np.pi)
    assert np.abs(st.values - ref).max() < 1e-4


def test_stationary_double_well_against_quadrature():
    d = 0.25
    g = Grid1D.from_spacing(-3, 3, 0.01)
    st = stationary_fp(g, double_well_field(d))

    def unnorm(k):
        return np.exp(-(k**4 / 4 - k**2 / 2) / d)

    z, _ = quad(unnorm, -3, 3, epsabs=1e-13, epsrel=1e-13)
    ref = unnorm(g.nodes) / z
    assert np.abs(st.values - ref).max() / ref.max() < 1e-4
    # bimodal: peaks near +-1, dip at 0
    assert st.values[g.index_of(1.0)] > 2 * st.values[g.index_of(0.0)]


def test_stationary_non_confining_is_reported():
    g = Grid1D(-5, 5, 101)
    with pytest.raises(NumericalGuardError):
        stationary_fp(g, DriftDiffusionField(lambda k, t: k, 1.0))


@pytest.mark.parametrize(
    "field, half_width, dk, flux",
    [
        (ou_field(), 8.0, 0.02, "central"),
        (double_well_field(0.25), 2.5, 0.01, "central"),
        (double_well_field(0.25), 3.0, 0.02, "fitted"),
    ],
    ids=["ou", "double-well", "double-well-fitted"],
)
def test_long_time_matches_stationary(field, half_width, dk, flux):
    g = Grid1D.from_spacing(-half_width, half_width, dk)
    traj = solve_fokker_planck(g, field, DensityOnGrid.gaussian(g, 0.0, 0.5), 20.0, flux=flux)
    st = stationary_fp(g, field)
    assert g.integrate(np.abs(traj.final.values - st.values)) < 1e-4


def test_table_field_interpolates():
    k = np.linspace(-4, 4, 9)
    fld = DriftDiffusionField.from_table(k, -k, np.ones_like(k))
    g = Grid1D(-4, 4, 81)
    mu, d = fld.sample(g)
    np.testing.assert_allclose(mu, -g.nodes, atol=1e-14)
    np.testing.assert_allclose(d, 1.0)
    with pytest.raises(ValidationError):
        DriftDiffusionField.from_table(k, -k, -np.ones_like(k))
