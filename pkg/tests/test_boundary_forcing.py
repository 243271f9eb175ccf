import numpy as np
import pytest

from core.boundary_forcing import BoundaryForcing
from data.models import ForcingConfig
from utils.exceptions import ConfigError


def test_algebraic_forcing_and_derivatives():
    forcing = BoundaryForcing(2, "algebraic", 1e-3, [1.0, 2.0])
    np.testing.assert_allclose(forcing.value(1.0), [5e-4, 1e-3])
    # d/dt (1+t)^{-1} = -(1+t)^{-2}
    np.testing.assert_allclose(forcing.derivative(1.0, 1), [-2.5e-4, -5e-4])
    assert forcing.hyperbolic(0.0, 4) == pytest.approx(1e-3 * 24)
    np.testing.assert_allclose(forcing.parabolic(0.0, 2), [4e-3])
    assert not forcing.is_zero


def test_envelope_bound_holds_for_algebraic():
    forcing = BoundaryForcing(2, "algebraic", 2e-3, [0.0, 1.0])
    assert forcing.envelope_violation(np.linspace(0, 100, 11)) == pytest.approx(1.0)


def test_measure_by_boundary_case():
    forcing = BoundaryForcing(2, "algebraic", 1.0, [1.0, 1.0])
    outflow = forcing.measure(0.0, "outflow")
    inflow = forcing.measure(0.0, "inflow")
    # 流出: 1 + 1 + 4; 流入再加 h_1 的 0..4 阶导数
    assert outflow == pytest.approx(6.0)
    assert inflow == pytest.approx(6.0 + 1 + 1 + 4 + 36 + 576)


def test_tabulated_forcing():
    times = [0.0, 1.0, 2.0, 3.0]
    samples = [[0.0, 0.0], [0.0, 1.0], [0.0, 4.0], [0.0, 9.0]]
    forcing = BoundaryForcing(2, "tabulated", times=times, samples=samples)
    assert forcing.parabolic(1.5)[0] == pytest.approx(2.25, abs=0.05)
    assert np.all(forcing.derivative(1.0, 4) == 0)


def test_none_forcing_is_zero():
    forcing = BoundaryForcing.from_config(3, None, "inflow")
    assert forcing.is_zero
    assert np.all(forcing.value(5.0) == 0)
    assert forcing.envelope_violation([0.0, 1.0]) == 0.0


def test_invalid_forcing_rejected():
    with pytest.raises(ConfigError):
        BoundaryForcing(2, "sinusoidal")
    with pytest.raises(ConfigError):
        BoundaryForcing(2, "algebraic", 1.0, [1.0, 0.0, 0.0])
    with pytest.raises(ConfigError):
        BoundaryForcing(2, "tabulated", times=[0.0, 1.0], samples=[[0.0], [1.0]])
    config = ForcingConfig(kind="tabulated", times=[0.0, 1.0, 2.0], samples=[[0, 0], [0, 1], [0, 2]])
    with pytest.raises(ConfigError):
        BoundaryForcing.from_config(2, config, "inflow")
    assert BoundaryForcing.from_config(2, config, "outflow").kind == "tabulated"
