import numpy as np
import pytest

from core.boundary_forcing import BoundaryForcing
from core.halfline_sim import (
    HalfLineSimulator,
    boundary_forcing_run,
    conservation_check,
    evolve_linear,
    evolve_nonlinear,
    fit_decay_rates,
    gaussian_pulse,
    grid_convergence,
    linearity_check,
    lp_norm,
    nonlinear_linear_agreement,
    operator_spectrum_check,
    profile_state,
    roe_dissipation,
    stationarity_check,
)
from data.models import ForcingConfig, SimulationConfig, Snapshots
from utils.exceptions import SimulationBlowUpError, SimulationError


def _short_config(**overrides):
    settings = {"h": 0.5, "x_dom": 40.0, "t_final": 5.0, "snapshots": 6}
    settings.update(overrides)
    return SimulationConfig(**settings)


def test_roe_dissipation():
    np.testing.assert_allclose(roe_dissipation(np.diag([1.0, -2.0])), np.diag([1.0, 2.0]), atol=1e-14)
    rotation = np.array([[0.0, -1.0], [1.0, 0.0]])
    np.testing.assert_allclose(roe_dissipation(rotation), np.eye(2))


def test_profile_state_beyond_truncation(burgers):
    _, profile = burgers
    values = profile_state(profile, np.array([0.0, profile.x_max + 3.0]))
    np.testing.assert_allclose(values[0], profile.values[0])
    np.testing.assert_array_equal(values[1], profile.u_plus)


def test_gaussian_pulse():
    centers = np.linspace(0, 20, 41)
    pulse = gaussian_pulse(centers, 2, 1e-3, 10.0, 2.0, np.array([1.0, -1.0]))
    assert pulse.shape == (41, 2)
    assert pulse[20, 0] == pytest.approx(1e-3)
    assert pulse[20, 1] == pytest.approx(-1e-3)


def test_lp_norm():
    values = np.ones((2, 4, 1))
    values[1] *= 2.0
    np.testing.assert_allclose(lp_norm(values, 0.5, 1.0), [2.0, 4.0])
    np.testing.assert_allclose(lp_norm(values, 0.5, 2.0), [np.sqrt(2.0), 2 * np.sqrt(2.0)])
    np.testing.assert_allclose(lp_norm(values, 0.5, np.inf), [1.0, 2.0])


def test_fit_decay_rates_on_synthetic_decay():
    times = np.linspace(0.0, 100.0, 41)
    values = ((1 + times) ** -0.5)[:, None, None] * np.ones((1, 10, 1))
    snapshots = Snapshots(mode="linear", times=times, centers=np.arange(10) + 0.5, values=values,
                          perturbation=values, h=1.0, dt=0.1, boundary_flux=np.zeros((41, 2, 1)),
                          valid_until=100.0)
    fits = fit_decay_rates(snapshots, [1.0, 2.0, np.inf])
    for fit in fits:
        assert fit.exponent == pytest.approx(-0.5, abs=1e-10)
        assert not fit.low_confidence
    assert [fit.target for fit in fits] == [0.0, -0.25, -0.5]
    short = snapshots.model_copy(update={"valid_until": 5.0})
    with pytest.raises(SimulationError):
        fit_decay_rates(short)


def test_simulator_validation(linear_coupled):
    model, profile = linear_coupled
    with pytest.raises(SimulationError):
        HalfLineSimulator(model, profile, _short_config(), mode="spectral")
    with pytest.raises(SimulationError):
        HalfLineSimulator(model, profile, _short_config(dt=10.0))
    simulator = HalfLineSimulator(model, profile, _short_config())
    assert simulator.M == 80
    assert simulator.dt <= 0.9 * simulator.dt_max
    with pytest.raises(SimulationError):
        simulator.run(np.zeros((3, 2)))


def test_inflow_boundary_uses_forcing(linear_coupled):
    model, profile = linear_coupled
    forcing = BoundaryForcing(2, "algebraic", 1e-3, [1.0, 1.0])
    simulator = HalfLineSimulator(model, profile, _short_config(), forcing=forcing)
    U = np.zeros((simulator.M, 2))
    np.testing.assert_allclose(simulator.boundary_state(U, 1.0), forcing.value(1.0))


def test_outflow_boundary_extrapolates_hyperbolic(isentropic_outflow):
    model, profile = isentropic_outflow
    simulator = HalfLineSimulator(model, profile, _short_config())
    U = np.zeros((simulator.M, 2))
    U[0, 0], U[1, 0] = 2.0, 3.0
    state = simulator.boundary_state(U, 0.0)
    assert state[0] == pytest.approx(1.5)
    # 齐次 Neumann 型条件 b1 u + b2 v = 0, b1 = 0
    assert state[1] == pytest.approx(0.0)


def test_linearity_and_conservation(linear_coupled):
    model, profile = linear_coupled
    config = _short_config()
    assert linearity_check(model, profile, config)["relative_error"] < 1e-12
    snapshots = evolve_linear(model, profile, config)
    assert snapshots.values.shape == (6, 80, 2)
    assert conservation_check(snapshots)["relative_error"] < 1e-12


def test_nonlinear_zero_perturbation_is_stationary(burgers):
    model, profile = burgers
    result = stationarity_check(model, profile, _short_config(h=0.25))
    assert result["drift_rate"] < 1e-2


def test_nonlinear_difference_shrinks_with_amplitude(burgers):
    model, profile = burgers
    result = nonlinear_linear_agreement(model, profile, _short_config(h=0.25))
    assert result["differences"][1] < result["differences"][0]
    assert result["slope"] > 0.9
    assert all(value < 0.5 for value in result["relative_differences"])


def test_blow_up_is_reported(isentropic_inflow):
    model, profile = isentropic_inflow
    config = _short_config()
    simulator = HalfLineSimulator(model, profile, config, "nonlinear")
    perturbation = np.zeros((simulator.M, 2))
    perturbation[5, 0] = -10.0
    with pytest.raises(SimulationBlowUpError) as info:
        simulator.run(perturbation)
    assert info.value.time == 0.0
    assert info.value.location == pytest.approx(simulator.centers[5])
    with pytest.raises(SimulationError):
        simulator.operator_matrix()


def test_discrete_operator_is_stable(linear_coupled):
    model, profile = linear_coupled
    result = operator_spectrum_check(model, profile, h=1.0, length=20.0)
    assert not result["unstable"]
    assert all(value < 1e-3 for value in result["max_real"])


def test_boundary_forcing_run(linear_coupled):
    model, profile = linear_coupled
    config = _short_config(t_final=20.0, snapshots=21,
                           forcing=ForcingConfig(kind="algebraic", amplitude=1e-3, direction=[1.0, 1.0]))
    snapshots, fits, info = boundary_forcing_run(model, profile, config)
    assert np.all(snapshots.perturbation[0] == 0)
    assert np.max(np.abs(snapshots.perturbation[-1])) > 0
    assert len(fits) == 3
    assert not info["flagged"]
    assert info["measure_initial"] > 0


def test_grid_convergence(linear_coupled):
    model, profile = linear_coupled
    result = grid_convergence(model, profile, _short_config(h=0.5, t_final=3.0))
    assert len(result["errors"]) == 2
    assert result["orders"][0] > 1.5


@pytest.mark.slow
def test_free_decay_rates(isentropic_inflow):
    model, profile = isentropic_inflow
    config = SimulationConfig(h=0.5, t_final=150.0, snapshots=40)
    snapshots = evolve_linear(model, profile, config)
    fits = {fit.p: fit for fit in fit_decay_rates(snapshots, config.p_list)}
    assert fits[2.0].exponent == pytest.approx(-0.25, abs=0.1)
    assert fits[np.inf].exponent == pytest.approx(-0.5, abs=0.1)


@pytest.mark.slow
def test_nonlinear_evolution_small_perturbation_decays(isentropic_inflow):
    model, profile = isentropic_inflow
    config = SimulationConfig(h=0.5, t_final=60.0, snapshots=7)
    snapshots = evolve_nonlinear(model, profile, config)
    peaks = np.max(np.abs(snapshots.perturbation), axis=(1, 2))
    assert peaks[-1] < peaks[0]
