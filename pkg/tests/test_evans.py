import numpy as np
import pytest

from core.eigen_system import HPEigenSystem, PlantedEigenvalueSystem, ScalarParabolicSystem
from core.evans import (
    EvansContourSolver,
    analyticity_check,
    close_by_conjugation,
    conjugation_check,
    contour_midpoint,
    essential_spectrum_curves,
    essential_spectrum_margin,
    evans_at,
    evans_contour,
    frame_at,
    stable_trace,
    upper_contour,
    winding_number_of_path,
    x_max_independence_check,
)
from data.models import EvansConfig
from utils.exceptions import EvansError


def _circle(center=0.0, radius=1.0, turns=1, points=200):
    phase = np.linspace(0, 2 * np.pi * turns, points * turns + 1)
    z = center + radius * np.exp(1j * phase)
    z[-1] = z[0]
    return z


class TestWindingNumber:
    def test_counterclockwise_circle(self):
        z = _circle()
        assert winding_number_of_path(z.real, z.imag) == 1

    def test_double_and_reversed(self):
        z = _circle(turns=2)
        assert winding_number_of_path(z.real, z.imag) == 2
        z = _circle()[::-1]
        assert winding_number_of_path(z.real, z.imag) == -1

    def test_origin_outside(self):
        z = _circle(center=3.0)
        assert winding_number_of_path(z.real, z.imag) == 0

    def test_open_path_rejected(self):
        z = _circle()[:-10]
        with pytest.raises(EvansError):
            winding_number_of_path(z.real, z.imag)


class TestContourGeometry:
    def test_upper_contour_endpoints(self):
        upper = upper_contour(10.0, 1e-3, 64)
        assert upper[0] == 10.0
        assert upper[-1] == 1e-3
        assert np.all(upper.real >= -1e-12)
        assert np.all(upper.imag >= -1e-12)
        assert np.max(np.abs(upper)) == pytest.approx(10.0)
        assert np.min(np.abs(upper)) == pytest.approx(1e-3)

    def test_empty_contour_rejected(self):
        with pytest.raises(EvansError):
            upper_contour(1.0, 1.0, 64)
        with pytest.raises(EvansError):
            upper_contour(-1.0, 0.1, 64)

    def test_close_by_conjugation(self):
        upper = np.array([2.0, 2.0j, 0.1j, 0.1])
        closed = close_by_conjugation(upper)
        np.testing.assert_allclose(closed, [2.0, 2.0j, 0.1j, 0.1, -0.1j, -2.0j, 2.0])

    def test_contour_midpoint(self):
        assert contour_midpoint(2.0, 2.0j) == pytest.approx(2.0 * np.exp(0.25j * np.pi))
        assert contour_midpoint(4.0j, 1.0j) == pytest.approx(2.0j)
        assert contour_midpoint(1.0, 3.0) == pytest.approx(2.0)


def test_essential_spectrum_left_of_axis(isentropic_inflow):
    model, _ = isentropic_inflow
    assert essential_spectrum_margin(model) < 0
    curves = essential_spectrum_curves(model, [0.0])
    np.testing.assert_allclose(curves, 0, atol=1e-14)


def test_essential_spectrum_touches_axis_without_coupling(linear_decoupled):
    model, _ = linear_decoupled
    assert essential_spectrum_margin(model) == pytest.approx(0.0, abs=1e-12)


def test_scalar_evans_closed_form():
    system = ScalarParabolicSystem(a=1.0, b=1.0, x_max=10.0)
    for lam in (0.5, 2.0 + 3.0j):
        sample = evans_at(system, frame_at(system, lam), lam)
        mu = system.decaying_rate(lam)
        assert abs(sample.value) == pytest.approx(1.0 / np.sqrt(1.0 + abs(mu) ** 2), rel=1e-8)
        assert stable_trace(system, lam) == pytest.approx(mu)


def test_planted_eigenvalue_is_a_zero():
    system = PlantedEigenvalueSystem()
    values = {lam: evans_at(system, frame_at(system, lam), lam).value for lam in (0.2, 0.3, 0.4, 1.0)}
    assert abs(values[0.3]) < 1e-4 * abs(values[1.0])
    assert values[0.2].real * values[0.4].real < 0


def test_conjugation_symmetry():
    system = ScalarParabolicSystem(a=1.0, b=1.0, x_max=10.0)
    result = conjugation_check(system, [1.0 + 1.0j, 0.5 + 2.0j])
    assert result["passed"], result


def test_scalar_contour_is_stable():
    system = ScalarParabolicSystem(a=1.0, b=1.0, x_max=10.0)
    result = EvansContourSolver(system, EvansConfig(radius=8.0, n_min=32)).solve()
    assert result.winding_number == 0
    assert result.winding_by_crossing == 0
    assert result.verdict == "stable"
    assert result.radius == 8.0
    assert result.epsilon == pytest.approx(8e-4)
    np.testing.assert_allclose(result.lambdas[-1], result.lambdas[0])


def test_linear_coupled_contour_is_stable(linear_coupled):
    model, profile = linear_coupled
    result = evans_contour(model, profile, EvansConfig(radius=4.0, n_min=32))
    assert result.verdict == "stable", result.notes
    assert result.min_abs > result.abs_floor


@pytest.mark.slow
def test_planted_contour_detects_instability():
    system = PlantedEigenvalueSystem()
    result = evans_contour(None, None, EvansConfig(radius=2.0, n_min=32), threads=2, system=system)
    assert result.winding_number == 1
    assert result.verdict == "unstable"


@pytest.mark.slow
def test_argument_principle_around_planted_zero():
    system = PlantedEigenvalueSystem()
    result = analyticity_check(system, 0.3 + 0j, 0.1, points=16)
    assert result["nearest_integer"] == 1
    assert result["passed"], result
    quiet = analyticity_check(system, 1.0 + 0.5j, 0.1, points=16)
    assert quiet["nearest_integer"] == 0


@pytest.mark.slow
def test_isentropic_inflow_contour(isentropic_inflow):
    model, profile = isentropic_inflow
    result = evans_contour(model, profile, EvansConfig(radius_max=64.0), threads=4)
    assert result.verdict == "stable", result.notes
    assert result.winding_number == 0


@pytest.mark.slow
def test_x_max_independence(isentropic_inflow):
    model, profile = isentropic_inflow
    result = x_max_independence_check(model, profile, [1.0 + 0j, 2.0 + 2.0j])
    assert result["passed"], result


def test_evans_frame_dimension_mismatch():
    system = ScalarParabolicSystem()
    system.k = 2
    with pytest.raises(EvansError):
        frame_at(system, 1.0)
    with pytest.raises(EvansError):
        stable_trace(system, 1.0)


def test_hyperbolic_speed_bound(isentropic_inflow):
    model, profile = isentropic_inflow
    system = HPEigenSystem(model, profile)
    assert system.hyperbolic_speed_min == pytest.approx(model.sigma)
