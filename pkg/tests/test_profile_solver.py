import numpy as np
import pytest

from core.profile_solver import (
    constrained_state,
    integrated_profile_ode,
    profile_grid,
    rest_point_linearization,
    solve_profile,
    verify_decay,
)
from data.models import ProfileConfig
from utils.exceptions import ProfileError
from tests.conftest import make_model


def test_profile_grid_layout():
    grid = profile_grid(50.0, 1e-3, 1.05, 200)
    assert grid[0] == 0.0
    assert grid[-1] == pytest.approx(50.0)
    assert np.all(np.diff(grid) > 0)
    assert grid[1] == pytest.approx(1e-3)
    # 尾部间距不超过 X_max / tail_cells
    assert np.max(np.diff(grid)) <= 50.0 / 200 + 1e-12


def test_constant_profile(linear_coupled):
    model, profile = linear_coupled
    np.testing.assert_array_equal(profile.values, np.broadcast_to(model.u_plus, profile.values.shape))
    assert np.all(profile.derivatives == 0)
    assert profile.decay is not None
    assert all(bound.exact_zero for bound in profile.decay.bounds)
    assert profile.decay.theta == float("inf")


def test_constant_profile_without_stable_direction(linear_decoupled):
    _, profile = linear_decoupled
    assert profile.theta_est == 1.0
    assert profile.residual_max == 0.0


def test_burgers_profile_matches_tanh(burgers):
    _, profile = burgers
    exact = -np.tanh((profile.grid - 1.0) / 2.0)
    np.testing.assert_allclose(profile.values[:, 1], exact, atol=1e-7)
    np.testing.assert_allclose(profile.derivatives[:, 1], -0.5 / np.cosh((profile.grid - 1.0) / 2.0) ** 2,
                               atol=1e-6)
    assert profile.x0 == pytest.approx(1.0, abs=1e-6)
    assert profile.theta_est == pytest.approx(1.0)


def test_burgers_decay_certificate(burgers):
    _, profile = burgers
    for bound in profile.decay.bounds:
        assert bound.theta == pytest.approx(1.0, rel=0.05)
        assert bound.C > 0


def test_isentropic_inflow_profile(isentropic_inflow):
    model, profile = isentropic_inflow
    assert profile.theta_est == pytest.approx(0.2436, abs=5e-4)
    assert profile.x_max == pytest.approx(30.0 / profile.theta_est)
    np.testing.assert_allclose(profile.values[0], model.u_boundary, atol=1e-10)
    assert np.linalg.norm(profile.values[-1] - model.u_plus) < 1e-8
    assert profile.residual_max < 1e-6
    assert profile.first_integral_max < 1e-10
    assert profile.decay.theta == pytest.approx(profile.theta_est, rel=0.05)
    # 比容单调下降到 v_+
    assert np.all(np.diff(profile.values[:, 0]) <= 1e-10)


def test_isentropic_outflow_profile(isentropic_outflow):
    model, profile = isentropic_outflow
    assert profile.boundary_case == "outflow"
    np.testing.assert_allclose(profile.values[0], model.u_boundary, atol=1e-10)
    for x, U, dU in zip(profile.grid[::50], profile.values[::50], profile.derivatives[::50]):
        assert np.max(np.abs(integrated_profile_ode(model, U, dU))) < 1e-8


def test_rest_point_linearization_isentropic():
    model = make_model("isentropic_inflow")
    J, eigenvalues, _ = rest_point_linearization(model)
    v = model.u_plus[0]
    expected = (model.pressure_derivative(v) / model.sigma + model.sigma) * v / model.mu
    assert J.shape == (1, 1)
    assert eigenvalues[0].real == pytest.approx(expected)


def test_constrained_state_satisfies_first_integral():
    model = make_model("isentropic_inflow")
    U = constrained_state(model, [0.05])
    assert model.flux(U)[0] == pytest.approx(model.flux(model.u_plus)[0])


def test_inflow_boundary_incompatible_with_constraint():
    model = make_model("isentropic_inflow", u_boundary=[1.0, 0.1])
    with pytest.raises(ProfileError):
        solve_profile(model)


def test_too_short_domain_is_reported():
    model = make_model("isentropic_inflow")
    with pytest.raises(ProfileError):
        solve_profile(model, x_max=5.0)


def test_explicit_x_max_and_uncertified():
    model = make_model("burgers_embedding")
    profile = solve_profile(model, x_max=40.0, config=ProfileConfig(tail_cells=400), certify=False)
    assert profile.x_max == pytest.approx(40.0)
    assert profile.decay is None


def test_verify_decay_window(burgers):
    _, profile = burgers
    certificate = verify_decay(profile, k_max=1, window=(5.0, 15.0))
    assert len(certificate.bounds) == 2
    assert certificate.for_order(0).window == [5.0, 15.0]
    assert certificate.theta == pytest.approx(1.0, rel=0.02)


def test_verify_decay_rejects_tiny_window(burgers):
    _, profile = burgers
    with pytest.raises(ProfileError):
        verify_decay(profile, window=(10.0, 10.001))


def test_verify_decay_default_window_is_resolved_tail_half(burgers):
    _, profile = burgers
    certificate = verify_decay(profile, k_max=0)
    lo, hi = certificate.for_order(0).window
    deviation = np.linalg.norm(profile.values - profile.u_plus, axis=1)
    resolved = profile.grid[deviation > 1e-11 * deviation.max()]
    assert hi == pytest.approx(resolved[-1])
    assert lo == pytest.approx(0.5 * hi)
    assert hi <= profile.grid[-1]
    assert certificate.theta == pytest.approx(1.0, rel=0.02)
