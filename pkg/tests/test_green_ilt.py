import numpy as np
import pytest

from core.eigen_system import HPEigenSystem
from core.green_ilt import green_function_ilt, green_via_ilt, panel_width
from core.green_probe import probe_smooth_part
from core.resolvent import ResolventBuilder
from data.models import ProbeConfig
from utils.exceptions import ResolventError
from tests.conftest import heat_kernel_dirichlet


def test_panel_width_tracks_oscillation():
    assert panel_width(0.5, 0.2) == pytest.approx(np.pi)
    assert panel_width(4.0, 1.0) == pytest.approx(np.pi / 4.0)
    assert panel_width(1.0, 10.0) == pytest.approx(np.pi / 10.0)


def test_non_positive_time_rejected(linear_decoupled):
    model, profile = linear_decoupled
    builder = ResolventBuilder(HPEigenSystem(model, profile))
    with pytest.raises(ResolventError):
        green_via_ilt(builder, 2.0, 0.0, 1.0)


@pytest.mark.slow
def test_smooth_part_matches_image_heat_kernel(linear_decoupled):
    """解耦系统: 输运分量完全由 H 承担, 光滑部分只剩带漂移的 Dirichlet 热核"""
    model, profile = linear_decoupled
    builder = ResolventBuilder(HPEigenSystem(model, profile))
    x, t, y = 2.0, 1.0, 1.0
    result = green_via_ilt(builder, x, t, y, threads=4)
    assert result["converged"]
    expected = heat_kernel_dirichlet(x, t, y, a=0.5, b=1.0)
    assert result["value"][1, 1] == pytest.approx(expected, rel=1e-3)
    assert abs(result["value"][0, 0]) < 1e-6
    assert abs(result["value"][0, 1]) < 1e-6


def test_model_level_entry_point_validates_inputs(linear_decoupled):
    model, profile = linear_decoupled
    with pytest.raises(ResolventError):
        green_function_ilt(model, profile, 2.0, 0.0, 1.0)
    with pytest.raises(ResolventError):
        green_function_ilt(model, profile, 2.0, 1.0, 1.0, contour_params={"panels": 4})


@pytest.mark.slow
def test_model_level_entry_point_matches_builder(linear_decoupled):
    model, profile = linear_decoupled
    params = {"rel_tol": 1e-3, "initial_panels": 8}
    direct = green_via_ilt(ResolventBuilder(HPEigenSystem(model, profile)), 2.0, 1.0, 1.0, **params)
    wrapped = green_function_ilt(model, profile, 2.0, 1.0, 1.0, contour_params=params)
    np.testing.assert_allclose(wrapped["value"], direct["value"])
    assert wrapped["evaluations"] == direct["evaluations"]


@pytest.mark.slow
def test_smooth_part_agrees_with_simulation(isentropic_inflow):
    """等熵流入型, t = 1: 反变换与模拟残差在粗 (x, y) 网格上相差不超过 5%"""
    model, profile = isentropic_inflow
    t = 1.0
    coarse = ProbeConfig(h=0.01)
    inverse, simulated = [], []
    for y in (2.0, 3.0):
        for x in (0.5, 1.0, 1.5):
            inverse.append(green_function_ilt(model, profile, x, t, y, threads=4)["value"][:, 0])
            simulated.append(probe_smooth_part(model, profile, x, t, y, coarse))
    inverse, simulated = np.array(inverse), np.array(simulated)
    assert np.max(np.abs(inverse - simulated)) < 0.05 * np.max(np.abs(inverse))
