import numpy as np
import pytest

from boltz_sldg.errors import (
    ConfigError,
    InvalidArgumentError,
    StepFailureError,
)
from boltz_sldg.imex import (
    ButcherPair,
    builtin_tableaux,
    classify,
    imex_step,
    imex_step_shu_osher,
    limiting_euler_step,
    shu_osher_coeffs,
)
from boltz_sldg.limiter import LimiterConfig
from boltz_sldg.mesh import BoundaryKind, NodalBasis, SpatialMesh, node_coordinates
from boltz_sldg.transport import ShiftCache
from boltz_sldg.velocity import (
    DistributionField,
    MacroField,
    ap_error,
    maxwellian,
    moments,
    total_conserved,
)

BUILTINS = ("FBEuler", "DP2A242", "ARS443")


def _smooth_field(mesh, basis, grid, gauss):
    x = node_coordinates(mesh, basis)
    rho = 1.0 + 0.3 * np.sin(2.0 * np.pi * x)
    temp = 0.9 + 0.1 * np.cos(2.0 * np.pi * x)
    u = MacroField.from_primitive(
        rho, 0.4 * np.ones_like(x), -0.2 * np.ones_like(x), temp, mesh, basis
    )
    f = maxwellian(u, grid)
    bump = 0.05 * gauss(grid, 1.0, 1.5, 0.5, 0.5)
    mod = (1.0 + 0.1 * np.sin(2.0 * np.pi * x))[..., None, None]
    return f.like(f.values + bump[None, None] * mod)


def _homogeneous_field(mesh, basis, grid, gauss):
    slice_ = gauss(grid, 1.0, 0.5, 0.0, 0.7) + 0.7 * gauss(grid, 0.8, -0.8, 0.4, 0.9)
    shape = (mesh.n_cells, basis.n_nodes) + slice_.shape
    return DistributionField(np.broadcast_to(slice_, shape).copy(), mesh, basis, grid)


@pytest.fixture(scope="module")
def stepping_env(grid16):
    from boltz_sldg.collision import build_collision_plan

    mesh = SpatialMesh(0.0, 1.0, 8, BoundaryKind.PERIODIC)
    basis = NodalBasis.create(2)
    plan = build_collision_plan(grid16)
    cache = ShiftCache(mesh, basis, grid16)
    return mesh, basis, grid16, plan, cache


def test_builtin_classifications():
    fb = classify(builtin_tableaux("FBEuler"))
    assert fb.is_type_ck and fb.is_ars and fb.is_gsa and not fb.is_type_a
    dp = classify(builtin_tableaux("DP2A242"))
    assert dp.is_type_a and dp.is_gsa and not dp.is_type_ck and not dp.is_ars
    ars = classify(builtin_tableaux("ARS443"))
    assert ars.is_type_ck and ars.is_ars and ars.is_gsa and not ars.is_type_a


def test_builtin_stage_counts_and_abscissae():
    fb = builtin_tableaux("FBEuler")
    assert fb.b.shape == (2,)
    np.testing.assert_array_equal(fb.c, [0.0, 1.0])
    dp = builtin_tableaux("DP2A242")
    assert dp.b.shape == (4,)
    np.testing.assert_array_equal(dp.c_tilde, [2.0, 0.0, 1.0, 1.0])
    ars = builtin_tableaux("ARS443")
    assert ars.b.shape == (5,)
    np.testing.assert_allclose(ars.c, [0.0, 0.5, 2.0 / 3.0, 0.5, 1.0])
    np.testing.assert_array_equal(ars.c, ars.c_tilde)


def test_unknown_builtin_rejected():
    with pytest.raises(InvalidArgumentError):
        builtin_tableaux("RK4")


def test_tableau_validation():
    a_exp = np.array([[0.0, 0.0], [1.0, 0.0]])
    a_imp = np.array([[0.0, 0.0], [0.0, 1.0]])
    with pytest.raises(InvalidArgumentError):
        # abscissae must match explicit row sums
        ButcherPair(
            "bad-c", a_exp, a_imp,
            np.array([1.0, 0.0]), np.array([0.0, 1.0]),
            np.array([0.0, 0.5]), np.array([0.0, 1.0]),
        )
    with pytest.raises(InvalidArgumentError):
        # explicit part must be strictly lower triangular
        ButcherPair(
            "bad-upper", a_exp.T, a_imp,
            np.array([1.0, 0.0]), np.array([0.0, 1.0]),
            np.array([0.0, 0.0]), np.array([0.0, 1.0]),
        )


def test_gsa_flag_detects_final_row_mismatch():
    a_exp = np.array([[0.0, 0.0], [1.0, 0.0]])
    a_imp = np.array([[0.0, 0.0], [0.0, 1.0]])
    half = np.array([0.5, 0.5])
    pair = ButcherPair(
        "averaging", a_exp, a_imp, half, half,
        np.array([0.0, 1.0]), np.array([0.0, 1.0]),
    )
    assert not pair.is_gsa
    for name in BUILTINS:
        assert builtin_tableaux(name).is_gsa


def test_stage_reconstruction_weights():
    """History weights of the stage predictor, one row per stage."""
    fb = shu_osher_coeffs(builtin_tableaux("FBEuler"))
    assert fb.history_start == 2
    assert [list(r) for r in fb.b_rows] == [[], []]

    dp = shu_osher_coeffs(builtin_tableaux("DP2A242"))
    assert dp.history_start == 1
    expect_dp = [[], [-1.0], [-0.5, -0.5], [-0.125, -0.125, -0.75]]
    for row, expect in zip(dp.b_rows, expect_dp):
        np.testing.assert_allclose(row, expect, atol=1e-14)

    ars = shu_osher_coeffs(builtin_tableaux("ARS443"))
    assert ars.history_start == 2
    expect_ars = [[], [], [1.0 / 3.0], [-4.0 / 3.0, 1.0], [16.0 / 3.0, -4.0, 1.0]]
    for row, expect in zip(ars.b_rows, expect_ars):
        np.testing.assert_allclose(row, expect, atol=1e-13)


@pytest.mark.parametrize("name", BUILTINS)
def test_one_step_conserves_moments(name, stepping_env, gauss):
    mesh, basis, grid, plan, cache = stepping_env
    f = _smooth_field(mesh, basis, grid, gauss)
    before = total_conserved(f)
    after = total_conserved(
        imex_step(builtin_tableaux(name), f, 1e-3, 1.0, plan, cache)
    )
    drift = np.abs(after - before)
    assert drift[0] <= 1e-11
    assert drift[1] <= 1e-8 and drift[2] <= 1e-8
    assert drift[3] <= 1e-7


def test_vanishing_step_leaves_state_unchanged(stepping_env, gauss):
    mesh, basis, grid, plan, cache = stepping_env
    f = _smooth_field(mesh, basis, grid, gauss)
    g = imex_step(builtin_tableaux("ARS443"), f, 1e-9, 1.0, plan, cache)
    assert np.abs(g.values - f.values).max() <= 1e-8 * f.values.max()


def test_equilibrium_stays_near_equilibrium_when_stiff(stepping_env, grid32, plan32):
    mesh, basis, _, _, _ = stepping_env
    x = node_coordinates(mesh, basis)
    rho = 1.0 + 0.3 * np.sin(2.0 * np.pi * x)
    temp = 0.9 + 0.1 * np.cos(2.0 * np.pi * x)
    u = MacroField.from_primitive(
        rho, 0.4 * np.ones_like(x), -0.2 * np.ones_like(x), temp, mesh, basis
    )
    f = maxwellian(u, grid32)
    cache = ShiftCache(mesh, basis, grid32)
    g = imex_step(builtin_tableaux("ARS443"), f, 1e-3, 1e-8, plan32, cache)
    assert ap_error(f) <= 1e-12
    assert ap_error(g) <= 1e-6


@pytest.mark.parametrize("name", BUILTINS)
def test_direct_and_reconstructed_forms_agree_without_transport(
    name, stepping_env, gauss
):
    """With spatially uniform data the two stage formulations coincide in
    exact arithmetic; round-off is all that separates them."""
    mesh, basis, grid, plan, cache = stepping_env
    f = _homogeneous_field(mesh, basis, grid, gauss)
    tab = builtin_tableaux(name)
    a = imex_step(tab, f, 1e-4, 1.0, plan, cache)
    b = imex_step_shu_osher(tab, f, 1e-4, 1.0, plan, cache)
    rel = np.abs(a.values - b.values).max() / np.abs(a.values).max()
    assert rel <= 1e-10


def test_direct_and_reconstructed_forms_agree_to_step_order_with_transport(
    stepping_env, gauss
):
    """With transport active the final-stage source recomputation separates
    the two forms at second order in the step size."""
    mesh, basis, grid, plan, cache = stepping_env
    f = _smooth_field(mesh, basis, grid, gauss)
    tab = builtin_tableaux("ARS443")
    a = imex_step(tab, f, 1e-4, 1.0, plan, cache)
    b = imex_step_shu_osher(tab, f, 1e-4, 1.0, plan, cache)
    rel = np.abs(a.values - b.values).max() / np.abs(a.values).max()
    assert rel <= 1e-5


def test_constant_or_nodal_stiffness_agree(stepping_env, gauss):
    mesh, basis, grid, plan, cache = stepping_env
    f = _smooth_field(mesh, basis, grid, gauss)
    tab = builtin_tableaux("ARS443")
    a = imex_step(tab, f, 1e-3, 0.05, plan, cache)
    nodal = np.full((mesh.n_cells, basis.n_nodes), 0.05)
    b = imex_step(tab, f, 1e-3, nodal, plan, cache)
    np.testing.assert_allclose(b.values, a.values, rtol=1e-13, atol=1e-16)


def test_limiting_stepper_requires_stiffly_accurate_tableau(stepping_env):
    mesh, basis, grid, _, cache = stepping_env
    a_exp = np.array([[0.0, 0.0], [1.0, 0.0]])
    a_imp = np.array([[0.0, 0.0], [0.0, 1.0]])
    half = np.array([0.5, 0.5])
    pair = ButcherPair(
        "averaging", a_exp, a_imp, half, half,
        np.array([0.0, 1.0]), np.array([0.0, 1.0]),
    )
    x = node_coordinates(mesh, basis)
    u = MacroField.from_primitive(
        np.ones_like(x), np.zeros_like(x), np.zeros_like(x),
        np.full_like(x, 0.7), mesh, basis,
    )
    with pytest.raises(InvalidArgumentError):
        limiting_euler_step(pair, u, 1e-3, cache)


def test_limiting_stepper_tracks_stiff_kinetic_moments(grid32, plan32):
    mesh = SpatialMesh(0.0, 1.0, 8, BoundaryKind.PERIODIC)
    basis = NodalBasis.create(2)
    x = node_coordinates(mesh, basis)
    rho = 1.0 + 0.3 * np.sin(2.0 * np.pi * x)
    temp = 0.9 + 0.1 * np.cos(2.0 * np.pi * x)
    u = MacroField.from_primitive(
        rho, 0.4 * np.ones_like(x), -0.2 * np.ones_like(x), temp, mesh, basis
    )
    cache = ShiftCache(mesh, basis, grid32)
    tab = builtin_tableaux("ARS443")
    dt = 1e-3
    u_lim = limiting_euler_step(tab, u, dt, cache)
    u_kin = moments(imex_step(tab, maxwellian(u, grid32), dt, 1e-8, plan32, cache))
    assert np.abs(u_lim.rho - u_kin.rho).max() / u_kin.rho.max() <= 1e-7
    assert (
        np.abs(u_lim.temperature - u_kin.temperature).max()
        / u_kin.temperature.max()
        <= 1e-7
    )


def test_limiting_stepper_preserves_uniform_states(grid32):
    mesh = SpatialMesh(0.0, 1.0, 8, BoundaryKind.PERIODIC)
    basis = NodalBasis.create(2)
    x = node_coordinates(mesh, basis)
    u = MacroField.from_primitive(
        np.full_like(x, 1.3), np.full_like(x, 0.2),
        np.full_like(x, -0.1), np.full_like(x, 0.7), mesh, basis,
    )
    cache = ShiftCache(mesh, basis, grid32)
    out = limiting_euler_step(builtin_tableaux("ARS443"), u, 1e-3, cache)
    assert np.abs(out.rho - u.rho).max() <= 1e-12
    assert np.abs(out.u - u.u).max() <= 1e-12
    assert np.abs(out.temperature - u.temperature).max() <= 1e-12


@pytest.fixture(scope="module")
def shock_field(grid32, gauss):
    mesh = SpatialMesh(0.0, 1.0, 16, BoundaryKind.NEUMANN)
    basis = NodalBasis.create(2)
    x = node_coordinates(mesh, basis)
    left = x <= 0.5
    rho = np.where(left, 1.0, 0.125)
    temp = np.where(left, 1.0, 0.25)
    vx = grid32.points[:, None]
    vy = grid32.points[None, :]
    vals = (
        rho[..., None, None]
        / (2.0 * np.pi * temp[..., None, None])
        * np.exp(-(vx**2 + vy**2)[None, None] / (2.0 * temp[..., None, None]))
    )
    return DistributionField(vals, mesh, basis, grid32)


def test_multistage_predictor_needs_rescaling_at_jumps(shock_field, plan32):
    """A large step across a density/temperature jump drives the late-stage
    moment predictions of the four-stage scheme out of the physical cone;
    the positivity rescale keeps the step well defined and bounded."""
    f = shock_field
    cache = ShiftCache(f.mesh, f.basis, f.grid)
    dt = 2.0 * f.mesh.dx / 7.0
    tab = builtin_tableaux("ARS443")
    with pytest.raises(StepFailureError) as err:
        imex_step(tab, f, dt, 1e-2, plan32, cache)
    assert err.value.stage == 5

    limited = imex_step(
        tab, f, dt, 1e-2, plan32, cache,
        limiter=LimiterConfig(enabled=True, sample_count=10),
    )
    u = moments(limited)
    assert 0.12 <= u.rho.min() and u.rho.max() <= 1.01
    assert 0.24 <= u.temperature.min() and u.temperature.max() <= 1.01
    assert limited.values.min() >= -1e-3
