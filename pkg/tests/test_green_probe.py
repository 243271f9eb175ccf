import numpy as np
import pytest

from core.coefficients import ProfileCoefficients, ReducedField
from core.green_probe import (
    characteristic_from,
    characteristic_path,
    green_probe,
    measure_spike,
    probe_smooth_part,
)
from data.models import ProbeConfig
from utils.exceptions import SimulationError


@pytest.fixture(scope="module")
def unit_field(linear_coupled):
    model, profile = linear_coupled
    # A_* = eta_* = 1
    return ReducedField(ProfileCoefficients(model, profile))


def test_characteristic_path_interior(unit_field):
    path = characteristic_path(unit_field, 3.0, 1.0)
    assert path.z0 == pytest.approx(2.0, abs=1e-9)
    assert path.z0_quadrature == pytest.approx(2.0, abs=1e-9)
    assert path.a_bar == pytest.approx(1.0, abs=1e-9)
    assert path.boundary_crossing_time is None
    assert path.positions[0] == pytest.approx(3.0)


def test_characteristic_path_hits_boundary(unit_field):
    path = characteristic_path(unit_field, 1.0, 3.0)
    assert path.boundary_crossing_time == pytest.approx(2.0, abs=1e-8)
    assert path.z0 == pytest.approx(0.0, abs=1e-8)
    assert path.z0_quadrature is None


def test_characteristic_path_requires_positive_time(unit_field):
    with pytest.raises(SimulationError):
        characteristic_path(unit_field, 1.0, 0.0)


def test_characteristic_from(unit_field, isentropic_outflow):
    assert characteristic_from(unit_field, 2.0, 1.5) == pytest.approx(3.5, abs=1e-10)

    model, profile = isentropic_outflow
    field = ReducedField(ProfileCoefficients(model, profile))
    moved = characteristic_from(field, 5.0, 0.5)
    assert moved is not None and moved < 5.0
    assert characteristic_from(field, 5.0, 1e3) is None


def test_measure_spike_removes_quadratic_baseline():
    centers = np.arange(0.0, 20.0, 0.01) + 0.005
    width = 0.1
    spike = 2.0 * np.exp(-0.5 * ((centers - 10.0) / width) ** 2) / (np.sqrt(2 * np.pi) * width)
    u = spike + 0.1 + 0.01 * (centers - 10.0) ** 2
    measured = measure_spike(centers, u, 10.2, width)
    assert measured["mass"] == pytest.approx(2.0, rel=2e-2)
    assert measured["position"] == pytest.approx(10.0, abs=1e-2)
    assert measured["spike"].shape == centers.shape


def test_measure_spike_errors():
    centers = np.arange(0.0, 20.0, 0.5) + 0.25
    with pytest.raises(SimulationError):
        measure_spike(centers, np.zeros_like(centers), 50.0, 0.1)
    with pytest.raises(SimulationError):
        # 网格过粗, 基线环带内点数不足
        measure_spike(centers, np.zeros_like(centers), 10.0, 0.1)


def test_probe_rejects_narrow_width(linear_coupled):
    model, profile = linear_coupled
    with pytest.raises(SimulationError):
        green_probe(model, profile, 2.0, [0.5], ProbeConfig(width_factor=1.0, h=0.05))


def test_probe_rejects_characteristic_leaving_domain(isentropic_outflow):
    model, profile = isentropic_outflow
    with pytest.raises(SimulationError):
        green_probe(model, profile, 1.0, [1e3], ProbeConfig(h=0.05))


@pytest.mark.slow
def test_probe_tracks_transported_mass(linear_coupled):
    model, profile = linear_coupled
    config = ProbeConfig(h=0.01, width_factor=4.0)
    report = green_probe(model, profile, 2.0, [0.5, 1.0], config)
    np.testing.assert_allclose(report.predicted_positions, [2.5, 3.0], atol=1e-8)
    np.testing.assert_allclose(report.measured_positions, report.predicted_positions, atol=0.05)
    np.testing.assert_allclose(report.predicted_mass, np.exp(-np.array([0.5, 1.0])), rtol=1e-6)
    np.testing.assert_allclose(report.measured_mass, report.predicted_mass, rtol=0.15)
    assert report.M > 0


@pytest.mark.slow
def test_probe_smooth_part_shape(linear_coupled):
    model, profile = linear_coupled
    value = probe_smooth_part(model, profile, 2.5, 0.5, 2.0, ProbeConfig(h=0.02))
    assert value.shape == (2,)
    assert np.all(np.isfinite(value))
