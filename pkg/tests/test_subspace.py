import numpy as np
import pytest

from core.eigen_system import ScalarParabolicSystem
from core.subspace import (
    initial_frame,
    principal_angles,
    spectral_gap,
    stable_basis_at_infinity,
    stable_projector,
    transport_frame,
)
from utils.exceptions import EvansError


def test_stable_projector_properties():
    A = np.array([[-1.0, 2.0, 0.0], [0.0, 3.0, 1.0], [0.0, 0.0, -0.5]], dtype=complex)
    P, Ys, k = stable_projector(A)
    assert k == 2
    np.testing.assert_allclose(P @ P, P, atol=1e-12)
    np.testing.assert_allclose(P @ A, A @ P, atol=1e-12)
    np.testing.assert_allclose(P @ Ys, Ys, atol=1e-12)


def test_center_subspace_rejected():
    with pytest.raises(EvansError):
        stable_projector(np.diag([-1.0, 0.0, 1.0]))
    with pytest.raises(EvansError):
        initial_frame(np.diag([-1.0, 1e-12]))


def test_initial_frame_is_real_for_real_matrix():
    frame, k = initial_frame(np.array([[0.0, 1.0], [2.0, 1.0]]))
    assert k == 1
    assert np.all(frame.imag == 0)
    assert spectral_gap(np.array([[0.0, 1.0], [2.0, 1.0]])) == pytest.approx(1.0)


def test_transport_stays_in_stable_subspace():
    system = ScalarParabolicSystem(a=1.0, b=1.0)
    start, end = 1.0 + 0j, 3.0 + 4.0j
    frame, k = initial_frame(system.limit_matrix(start))
    V, gap = transport_frame(system.limit_matrix, frame, start, end, k)
    mu = system.decaying_rate(end)
    exact = np.array([[1.0], [mu]])
    assert np.max(principal_angles(V, exact)) < 1e-6
    assert gap > 0


def test_path_is_analytic_in_lambda():
    """不含分支点的闭合回路输运后标架近似回到起点"""
    system = ScalarParabolicSystem(a=1.0, b=2.0)
    loop = 3.0 + np.exp(1j * np.linspace(0, 2 * np.pi, 65))
    loop[-1] = loop[0]
    path = stable_basis_at_infinity(system.limit_matrix, loop, k=1)
    first, last = path.frames[0][:, 0], path.frames[-1][:, 0]
    assert np.max(principal_angles(first[:, None], last[:, None])) < 1e-8
    ratio = last[0] / first[0]
    assert abs(ratio - 1.0) < 1e-2


def test_dimension_mismatch_detected():
    system = ScalarParabolicSystem()
    with pytest.raises(EvansError):
        stable_basis_at_infinity(system.limit_matrix, [1.0, 2.0], k=2)
