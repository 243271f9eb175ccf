import numpy as np
import pytest

from core.coefficients import ProfileCoefficients, ReducedField, fornberg_weights, grid_derivative
from utils.exceptions import ModelError


def test_fornberg_central_weights():
    weights = fornberg_weights(0.0, np.array([-1.0, 0.0, 1.0]), 2)
    np.testing.assert_allclose(weights[0], [0.0, 1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(weights[1], [-0.5, 0.0, 0.5], atol=1e-15)
    np.testing.assert_allclose(weights[2], [1.0, -2.0, 1.0], atol=1e-14)


def test_grid_derivative_on_nonuniform_grid():
    x = np.cumsum(np.concatenate(([0.0], np.geomspace(0.01, 0.1, 60))))
    values = np.stack((np.sin(x), np.exp(-x)), axis=1)
    derivative = grid_derivative(x, values)
    np.testing.assert_allclose(derivative[:, 0], np.cos(x), atol=1e-4)
    np.testing.assert_allclose(derivative[:, 1], -np.exp(-x), atol=1e-4)
    with pytest.raises(ModelError):
        grid_derivative(x[:3], values[:3])


def test_isentropic_coefficients(isentropic_inflow):
    model, profile = isentropic_inflow
    coefficients = ProfileCoefficients(model, profile)
    assert not coefficients.constant
    # b1 = 0: A_* = sigma 沿整条剖面
    np.testing.assert_allclose(coefficients.A_star, model.sigma)
    assert coefficients.min_abs_A_star == pytest.approx(model.sigma)
    assert np.all(coefficients.eta_star > 0)
    A, dA, B = coefficients.at(profile.x_max + 1.0)
    np.testing.assert_array_equal(A, coefficients.A_plus)
    assert np.all(dA == 0)
    A_tab, B_tab = coefficients.tabulate(np.array([0.0, 1.0, 1e3]))
    np.testing.assert_allclose(A_tab[0], coefficients.Abar[0], atol=1e-12)
    np.testing.assert_array_equal(B_tab[2], coefficients.B_plus)


def test_constant_coefficients(linear_coupled):
    model, profile = linear_coupled
    coefficients = ProfileCoefficients(model, profile)
    assert coefficients.constant
    np.testing.assert_allclose(coefficients.A_star, 1.0)
    np.testing.assert_allclose(coefficients.eta_star, 1.0)


def test_reduced_field_closed_form(linear_coupled):
    model, profile = linear_coupled
    field = ReducedField(ProfileCoefficients(model, profile))
    x = np.array([0.0, 2.5, profile.x_max + 5.0])
    np.testing.assert_allclose(field.tau(x), x, atol=1e-10)
    np.testing.assert_allclose(field.damping(x), x, atol=1e-10)
    assert field.attenuation(1.0, 3.0) == pytest.approx(np.exp(-2.0))
    assert field.density_factor(1.0, 3.0) == pytest.approx(np.exp(-2.0))
    assert field.sign == 1.0
    np.testing.assert_allclose(field.R(1.0), [1.0, 0.0], atol=1e-12)


def test_reduced_field_outflow_sign(isentropic_outflow):
    model, profile = isentropic_outflow
    field = ReducedField(ProfileCoefficients(model, profile))
    assert field.sign == -1.0
    assert np.all(field.tau(np.array([1.0, 5.0])) < 0)
