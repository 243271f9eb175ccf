import numpy as np
import pytest

from core.eigen_system import (
    HPEigenSystem,
    PlantedEigenvalueSystem,
    ScalarParabolicSystem,
    assemble_matrix,
    boundary_kernel_basis,
    boundary_matrix,
    build_eigen_system,
    endpoint_matrix,
)
from utils.exceptions import ConfigError


def test_linear_coupled_matrix_closed_form():
    from tests.conftest import make_model

    model = make_model("linear_coupled")
    lam = 0.7 + 0.2j
    expected = np.array([[-lam, 0, 1], [0, 0, 1], [lam, lam, -1]], dtype=complex)
    np.testing.assert_allclose(endpoint_matrix(model, lam), expected)


def test_assemble_matrix_solves_first_order_form():
    """W' = A W 的第一行等价于 (lam + A-bar11') u + A-bar11 u' + ... = 0"""
    A = np.array([[2.0, 0.5], [-0.3, 1.0]])
    B = np.array([[0.0, 0.0], [0.4, 1.5]])
    M = assemble_matrix(A, np.zeros_like(A), B, 1.0)
    assert M.shape == (3, 3)
    c = B[1, 0] / B[1, 1]
    assert M[0, 0] == pytest.approx(-1.0 / (A[0, 0] - A[0, 1] * c))


def test_dimensions_and_consistent_splitting(isentropic_inflow, isentropic_outflow):
    for (model, profile), k in ((isentropic_inflow, 2), (isentropic_outflow, 1)):
        system = HPEigenSystem(model, profile)
        assert system.N == 3
        assert system.k == k
        assert system.boundary_matrix.shape == (k, 3)
        for lam in (1e-3, 1.0, 5.0 + 5.0j, 40.0j):
            assert system.stable_dimension(lam) == k


def test_limit_matrix_matches_endpoint(isentropic_inflow):
    model, profile = isentropic_inflow
    system = build_eigen_system(model, profile)
    np.testing.assert_allclose(system.limit_matrix(2.0), endpoint_matrix(model, 2.0), atol=1e-12)
    view = build_eigen_system(model, profile, lam=2.0)
    np.testing.assert_allclose(view.matrix(1.0), system.matrix(1.0, 2.0))
    assert view.N == 3


def test_boundary_matrices():
    from tests.conftest import make_model

    inflow = boundary_matrix(make_model("linear_coupled"), "inflow")
    np.testing.assert_array_equal(inflow, [[1, 0, 0], [0, 1, 0]])
    outflow_model = make_model("isentropic_outflow")
    outflow = boundary_matrix(outflow_model, "outflow")
    np.testing.assert_allclose(outflow, [[0.0, 1.0 / outflow_model.u_boundary[0], 0.0]])
    with pytest.raises(ConfigError):
        boundary_matrix(outflow_model, "sideways")


def test_boundary_kernel_basis_normalization():
    boundary = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    V0 = boundary_kernel_basis(boundary)
    assert V0.shape == (3, 1)
    np.testing.assert_allclose(boundary @ V0, 0, atol=1e-14)
    assert np.linalg.det(np.hstack((boundary.T, V0))) == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        boundary_kernel_basis(np.array([[1.0, 0.0], [2.0, 0.0]]))


def test_planted_potential_and_eigenfunction():
    system = PlantedEigenvalueSystem()
    x = 1.3
    lam = system.lam_star
    # tanh(x) sech(x) 满足 v'' = (lam - q) v
    v = np.tanh(x) / np.cosh(x)
    h = 1e-4

    def phi(s):
        return np.tanh(s) / np.cosh(s)

    second = (phi(x + h) - 2 * phi(x) + phi(x - h)) / h ** 2
    assert second == pytest.approx((lam - system.potential(x)) * v, rel=1e-5)
    assert system.k == 1 and system.N == 2


def test_scalar_parabolic_system():
    system = ScalarParabolicSystem(a=1.0, b=2.0)
    lam = 3.0 + 1.0j
    mu = system.decaying_rate(lam)
    assert mu.real < 0
    # b mu^2 - a mu - lam = 0
    assert 2.0 * mu ** 2 - mu - lam == pytest.approx(0)
    with pytest.raises(ConfigError):
        ScalarParabolicSystem(b=0.0)
