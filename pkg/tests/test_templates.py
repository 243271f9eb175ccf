import numpy as np
import pytest

from core.hp_model import endpoint_characteristics
from core.templates import cutoff, fit_template_constant, green_envelope, template_eval
from tests.conftest import make_model


@pytest.fixture(scope="module")
def endpoint():
    # a_1 < 0 < a_2
    return endpoint_characteristics(make_model("linear_coupled"))


def test_cutoff_support(endpoint):
    a_n = endpoint.a_plus[-1]
    values = cutoff(endpoint, [0.0, a_n * 2.0, a_n * 2.0 + 0.1, -0.1], 2.0)
    np.testing.assert_array_equal(values, [1.0, 1.0, 0.0, 0.0])


def test_templates_at_initial_time(endpoint):
    theta, psi1, psi2 = template_eval(endpoint, 4.0, np.array([0.0, 1.0]), 0.0)
    np.testing.assert_allclose(theta, [1.0, 0.0])
    assert psi1[1] == 0.0
    assert psi2[1] == pytest.approx(2.0 ** -1.5)


def test_theta_peaks_on_outgoing_characteristic(endpoint):
    a = endpoint.a_plus[-1]
    x = np.linspace(0, 40, 4001)
    theta, _, _ = template_eval(endpoint, 4.0, x, 10.0)
    assert x[np.argmax(theta)] == pytest.approx(a * 10.0, abs=0.02)
    assert theta.max() == pytest.approx(11.0 ** -0.5)


def test_green_envelope_reflection_switches_on(endpoint):
    a_k, a_j = endpoint.a_plus
    y = 3.0
    t_hit = abs(y / a_k)
    before = green_envelope(endpoint, 4.0, a_j * 0.0, 0.9 * t_hit, y)
    after_x = a_j * 0.5 * t_hit
    after = green_envelope(endpoint, 4.0, after_x, 1.5 * t_hit, y)
    direct_only = sum(
        (1.5 * t_hit) ** -0.5 * np.exp(-(after_x - y - a * 1.5 * t_hit) ** 2 / (4.0 * 1.5 * t_hit))
        for a in endpoint.a_plus)
    assert after > direct_only
    assert before < 1.0
    assert green_envelope(endpoint, 4.0, 1.0, 0.0, y) == 0.0


def test_fit_template_constant(endpoint):
    x = np.linspace(0.0, 20.0, 81)
    t = np.full_like(x, 5.0)
    residual = 0.5 * green_envelope(endpoint, 4.0, x, t, 2.0)
    fit = fit_template_constant(residual, x, t, 2.0, endpoint, candidates=[1.0, 4.0, 16.0])
    # 包络随 M 单调增大
    assert fit["M"] == 16.0
    assert fit["ratio"] <= 0.5 + 1e-12
    zero = fit_template_constant(np.zeros_like(x), x, t, 2.0, endpoint)
    assert zero["ratio"] == 0.0
