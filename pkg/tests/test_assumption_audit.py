import pytest

from core.assumption_audit import audit_assumptions, box_samples, working_box
from core.profile_solver import solve_profile

CHECK_NAMES = ["block_structure", "b2_spectrum", "coordinate_map", "jacobian_consistency",
               "noncharacteristic", "hyperbolicity", "genuine_coupling", "dissipation", "profile_decay"]


def test_isentropic_inflow_passes(isentropic_inflow):
    model, profile = isentropic_inflow
    report = audit_assumptions(model, profile)
    assert [check.name for check in report.checks] == CHECK_NAMES
    assert report.passed, report.failed_checks()
    assert report.get_check("noncharacteristic").witness["theta1"] == pytest.approx(model.sigma)
    assert report.get_check("dissipation").witness["eta_plus"] > 0


def test_isentropic_outflow_passes(isentropic_outflow):
    model, profile = isentropic_outflow
    report = audit_assumptions(model, profile)
    assert report.passed, report.failed_checks()
    assert report.get_check("noncharacteristic").witness["A_star_max"] < 0


def test_linear_coupled_passes(linear_coupled):
    model, profile = linear_coupled
    report = audit_assumptions(model, profile)
    assert report.passed, report.failed_checks()


def test_decoupled_system_fails_dissipation(linear_decoupled):
    model, profile = linear_decoupled
    report = audit_assumptions(model, profile)
    assert not report.passed
    failed = report.failed_checks()
    assert "dissipation" in failed
    assert "genuine_coupling" in failed
    assert "noncharacteristic" not in failed
    assert "beta" in report.get_check("dissipation").message


def test_burgers_embedding_is_not_genuinely_coupled(burgers):
    model, profile = burgers
    report = audit_assumptions(model, profile)
    assert "genuine_coupling" in report.failed_checks()
    assert report.get_check("block_structure").passed
    assert report.get_check("profile_decay").passed


def test_missing_decay_certificate_is_a_failure(isentropic_inflow):
    model, _ = isentropic_inflow
    profile = solve_profile(model, certify=False)
    report = audit_assumptions(model, profile)
    assert report.failed_checks() == ["profile_decay"]


def test_working_box_covers_profile(isentropic_inflow):
    model, profile = isentropic_inflow
    box = working_box(profile)
    assert box.shape == (model.n, 2)
    assert (box[:, 0] <= profile.values.min(axis=0)).all()
    assert (box[:, 1] >= profile.values.max(axis=0)).all()
    samples = box_samples(model, box)
    assert model.in_domain(samples)
