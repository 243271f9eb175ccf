"""
结构假设审计模块

逐项检查块结构, b2 谱下界, 坐标变换, (H1), (H2), 真耦合, 耗散性与剖面衰减;
失败只记入报告, 不抛异常。
"""

import itertools
from typing import List, Optional

import numpy as np

from core.coefficients import ProfileCoefficients
from core.hp_model import Model, endpoint_characteristics, finite_difference_jacobian, reduced_quantities
from data.models import AuditCheck, AuditReport, EndpointData, Profile
from utils.exceptions import BoundaryLayerError, ModelError
from utils.logger import get_logger

logger = get_logger(__name__)

BOX_INFLATION = 0.2
BOX_SAMPLES = 5


def working_box(profile: Profile, inflation: float = BOX_INFLATION) -> np.ndarray:
    """剖面取值范围放大 20% 的工作盒, 返回 (n, 2) 的上下界"""
    lower = profile.values.min(axis=0)
    upper = profile.values.max(axis=0)
    margin = inflation * (upper - lower) + 1e-3 * np.maximum(1.0, np.abs(0.5 * (lower + upper)))
    return np.stack((lower - margin, upper + margin), axis=1)


def box_samples(model: Model, box: np.ndarray, count: int = BOX_SAMPLES) -> np.ndarray:
    """工作盒内的张量网格采样 (仅保留物理状态)"""
    axes = [np.linspace(lo, hi, count) for lo, hi in box]
    states = np.array(list(itertools.product(*axes)))
    keep = ~model.domain_violation(states)
    return states[keep]


class AssumptionAuditor:
    """结构假设审计器"""

    def __init__(self, model: Model, profile: Profile, coefficients: Optional[ProfileCoefficients] = None):
        self.model = model
        self.profile = profile
        self.coefficients = coefficients
        self.samples = box_samples(model, working_box(profile))
        self.endpoint: Optional[EndpointData] = None

    def run(self) -> AuditReport:
        checks: List[AuditCheck] = []
        for check in (self._block_structure, self._b2_spectrum, self._coordinate_map,
                      self._jacobian_consistency, self._noncharacteristic, self._hyperbolicity,
                      self._genuine_coupling, self._dissipation, self._profile_decay):
            try:
                checks.append(check())
            except BoundaryLayerError as e:
                checks.append(AuditCheck(name=check.__name__.lstrip('_'), passed=False, message=str(e)))

        report = AuditReport(model_name=self.model.name, boundary_case=self.model.boundary_case, checks=checks)
        if report.passed:
            logger.info(f"假设审计通过: {self.model.name}")
        else:
            logger.warning(f"假设审计未通过: {report.failed_checks()}")
        return report

    def _block_structure(self) -> AuditCheck:
        B = self.model.viscosity(self.samples)
        first_row = float(np.max(np.abs(B[:, 0, :])))
        return AuditCheck(name="block_structure", passed=first_row == 0.0,
                          witness={"max_first_row": first_row, "samples": int(len(self.samples))},
                          message="B 的第一块行恒为零" if first_row == 0.0 else "B 的第一块行非零")

    def _b2_spectrum(self) -> AuditCheck:
        B = self.model.viscosity(self.samples)
        spectra = np.linalg.eigvals(B[:, 1:, 1:])
        theta = float(np.min(spectra.real))
        return AuditCheck(name="b2_spectrum", passed=theta > 0,
                          witness={"theta": theta},
                          message=f"工作盒上 min Re sigma(b2) = {theta:.4g}")

    def _coordinate_map(self) -> AuditCheck:
        model = self.model
        worst_coupling = 0.0
        min_det = np.inf
        for U in self.samples:
            J = np.asarray(model.coordinate_jacobian(U), dtype=float)
            worst_coupling = max(worst_coupling, float(np.max(np.abs(J[0, 1:]))) if model.n > 1 else 0.0)
            min_det = min(min_det, abs(float(np.linalg.det(J))))
        round_trip = max(float(np.max(np.abs(model.inverse_coordinate_map(model.coordinate_map(U)) - U)))
                         for U in self.samples)
        passed = worst_coupling == 0.0 and min_det > 1e-12 and round_trip < 1e-10
        return AuditCheck(name="coordinate_map", passed=passed,
                          witness={"first_row_coupling": worst_coupling, "min_abs_det": min_det,
                                   "round_trip_error": round_trip},
                          message="坐标变换三角且可逆" if passed else "坐标变换不满足三角可逆结构")

    def _jacobian_consistency(self) -> AuditCheck:
        worst = 0.0
        for U in self.samples:
            analytic = self.model.flux_jacobian(U)
            numeric = finite_difference_jacobian(self.model, U)
            worst = max(worst, float(np.linalg.norm(analytic - numeric) / (1.0 + np.linalg.norm(analytic))))
        return AuditCheck(name="jacobian_consistency", passed=worst <= 1e-6,
                          witness={"max_relative_error": worst},
                          message=f"解析 Jacobian 与差分的相对误差 {worst:.2e}")

    def _noncharacteristic(self) -> AuditCheck:
        if self.coefficients is not None:
            A_star = self.coefficients.A_star
        else:
            A_star = np.array([reduced_quantities(self.model, U).A_star for U in self.profile.values])
        inflow = self.model.boundary_case == "inflow"
        bound = float(np.min(A_star)) if inflow else float(-np.max(A_star))
        return AuditCheck(name="noncharacteristic", passed=bound > 0,
                          witness={"A_star_min": float(np.min(A_star)), "A_star_max": float(np.max(A_star)),
                                   "A_star_at_boundary": float(A_star[0]), "theta1": bound},
                          message=f"{'流入 A_* >= theta1 > 0' if inflow else '流出 A_* <= -theta1 < 0'}, theta1 = {bound:.4g}")

    def _hyperbolicity(self) -> AuditCheck:
        try:
            self.endpoint = endpoint_characteristics(self.model)
        except ModelError as e:
            return AuditCheck(name="hyperbolicity", passed=False, message=str(e))
        ep = self.endpoint
        return AuditCheck(name="hyperbolicity", passed=ep.biorthogonality_error <= 1e-10,
                          witness={"a_plus": ep.a_plus.tolist(), "biorthogonality_error": ep.biorthogonality_error},
                          message="dF(U_+) 特征值实, 互异, 非零")

    def _genuine_coupling(self) -> AuditCheck:
        if self.endpoint is None:
            return AuditCheck(name="genuine_coupling", passed=False, message="端点特征数据不可用")
        B_plus = self.model.viscosity(self.model.u_plus)
        norms = np.linalg.norm(B_plus @ self.endpoint.r_plus, axis=0)
        return AuditCheck(name="genuine_coupling", passed=bool(np.all(norms > 1e-10)),
                          witness={"norm_B_r": norms.tolist()},
                          message="B_+ r_j != 0 对全部特征方向成立")

    def _dissipation(self) -> AuditCheck:
        if self.endpoint is None:
            return AuditCheck(name="dissipation", passed=False, message="端点特征数据不可用")
        eta_plus = reduced_quantities(self.model, self.model.u_plus).eta_star
        beta = self.endpoint.beta_plus
        errors = list(self.endpoint.violations)
        if eta_plus <= 0:
            errors.append(f"eta_*^+ = {eta_plus:.3e} <= 0")
        return AuditCheck(name="dissipation", passed=not errors,
                          witness={"eta_plus": eta_plus, "beta_plus": beta.tolist()},
                          message="; ".join(errors) if errors else "eta_*^+ > 0 且 beta_j^+ > 0")

    def _profile_decay(self) -> AuditCheck:
        decay = self.profile.decay
        if decay is None:
            return AuditCheck(name="profile_decay", passed=False, message="剖面缺少衰减证书")
        theta = decay.theta
        return AuditCheck(name="profile_decay", passed=theta > 0,
                          witness={"theta": theta if np.isfinite(theta) else "inf",
                                   "residual_max": self.profile.residual_max,
                                   "first_integral_max": self.profile.first_integral_max},
                          message=f"拟合衰减率 theta = {theta:.4g}")


def audit_assumptions(model: Model, profile: Profile,
                      coefficients: Optional[ProfileCoefficients] = None) -> AuditReport:
    """审计全部结构假设"""
    return AssumptionAuditor(model, profile, coefficients).run()
