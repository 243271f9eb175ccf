"""
双曲-抛物守恒律模型

状态 U = (u, v), u 为标量双曲分量, v 为 r = n-1 维抛物分量;
粘性矩阵 B = [[0, 0], [b1, b2]]。
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import linalg, optimize

from data.models import BoundaryCase, EndpointData, ReducedData
from utils.exceptions import ConfigError, ModelError
from utils.logger import get_logger

logger = get_logger(__name__)

B2_CONDITION_MAX = 1e12


class Model(ABC):
    """双曲-抛物系统抽象基类

    flux / flux_jacobian / viscosity 接受形如 (..., n) 的状态并向量化返回。
    """

    def __init__(self, name: str, boundary_case: BoundaryCase,
                 u_plus: np.ndarray, u_boundary: Optional[np.ndarray] = None):
        if boundary_case not in ("inflow", "outflow"):
            raise ConfigError(f"未知的边界类型: {boundary_case}")
        self.name = name
        self.boundary_case = boundary_case
        self.u_plus = np.asarray(u_plus, dtype=float)
        self.u_boundary = (np.asarray(u_boundary, dtype=float)
                           if u_boundary is not None else self.u_plus.copy())
        if self.u_plus.shape != (self.n,) or self.u_boundary.shape != (self.n,):
            raise ConfigError(f"{name}: 状态维数必须为 {self.n}")

    @property
    @abstractmethod
    def n(self) -> int:
        """状态维数"""
        pass

    @property
    def r(self) -> int:
        return self.n - 1

    @abstractmethod
    def flux(self, U: np.ndarray) -> np.ndarray:
        """通量 F(U)"""
        pass

    @abstractmethod
    def flux_jacobian(self, U: np.ndarray) -> np.ndarray:
        """解析 Jacobian dF(U)"""
        pass

    @abstractmethod
    def viscosity(self, U: np.ndarray) -> np.ndarray:
        """粘性矩阵 B(U)"""
        pass

    def viscosity_derivative(self, U: np.ndarray) -> np.ndarray:
        """dB: [..., k, i, j] = dB_ij / dU_k, 默认常粘性"""
        U = np.asarray(U, dtype=float)
        return np.zeros(U.shape[:-1] + (self.n, self.n, self.n))

    def in_domain(self, U: np.ndarray) -> bool:
        return bool(np.all(np.isfinite(U)))

    def domain_violation(self, U: np.ndarray) -> np.ndarray:
        """逐状态的定义域违背标记, 形状为 U.shape[:-1]"""
        U = np.asarray(U, dtype=float)
        return ~np.all(np.isfinite(U), axis=-1)

    def coordinate_map(self, U: np.ndarray) -> np.ndarray:
        """三角坐标变换 W(U), 默认恒等"""
        return np.asarray(U, dtype=float)

    def coordinate_jacobian(self, U: np.ndarray) -> np.ndarray:
        return np.eye(self.n)

    def inverse_coordinate_map(self, W: np.ndarray) -> np.ndarray:
        return np.asarray(W, dtype=float)

    def hyperbolic_component(self, v: np.ndarray) -> float:
        """由约束 F^I(u, v) = F^I(U_+) 解出双曲分量 u"""
        target = self.flux(self.u_plus)[0]

        def residual(u):
            return self.flux(np.concatenate(([u], v)))[0] - target

        def slope(u):
            return self.flux_jacobian(np.concatenate(([u], v)))[0, 0]

        try:
            return float(optimize.newton(residual, self.u_plus[0], fprime=slope, tol=1e-14, maxiter=50))
        except (RuntimeError, ZeroDivisionError) as e:
            raise ModelError(f"无法由双曲约束求解 u: {e}")

    def shock_left_state(self) -> Optional[np.ndarray]:
        """与 U_+ 相连的驻定激波左状态 (若已知)"""
        return None

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "kind": type(self).__name__,
            "n": self.n,
            "boundary_case": self.boundary_case,
            "u_plus": self.u_plus.tolist(),
            "u_boundary": self.u_boundary.tolist(),
        }


class IsentropicGasModel(Model):
    """Lagrange 坐标下的等熵 Navier-Stokes 方程 (驻定坐标系)

    U = (v, u): 比容 v (双曲) 与速度 u (抛物);
    F = (sigma v - u, sigma u + p(v)), p(v) = a v^{-gamma}, B = diag(0, mu / v)。
    a 由 U_+ 与左状态 v_- 的 Rankine-Hugoniot 条件确定。
    """

    def __init__(self, name: str, boundary_case: BoundaryCase, u_plus, u_boundary=None,
                 gamma: float = 1.4, viscosity: float = 1.0, sigma: float = 1.0,
                 v_minus: float = 1.0):
        if gamma < 1:
            raise ConfigError(f"绝热指数 gamma 必须 >= 1: {gamma}")
        if viscosity <= 0:
            raise ConfigError(f"粘性系数必须为正: {viscosity}")
        if sigma == 0:
            raise ConfigError("sigma 不能为零 (特征边界)")
        self.gamma = float(gamma)
        self.mu = float(viscosity)
        self.sigma = float(sigma)
        self.v_minus = float(v_minus)
        super().__init__(name, boundary_case, u_plus, u_boundary)

        v_plus = self.u_plus[0]
        if v_plus <= 0 or self.v_minus <= 0 or v_plus == self.v_minus:
            raise ConfigError("需要 v_+ > 0, v_- > 0 且 v_+ != v_-")
        self.a = self.sigma ** 2 * (self.v_minus - v_plus) / (
            v_plus ** (-self.gamma) - self.v_minus ** (-self.gamma))
        if self.a <= 0:
            raise ConfigError(f"由 Rankine-Hugoniot 条件得到的压力系数非正: {self.a}")

    @property
    def n(self) -> int:
        return 2

    def pressure(self, v):
        return self.a * np.power(v, -self.gamma)

    def pressure_derivative(self, v):
        return -self.gamma * self.a * np.power(v, -self.gamma - 1.0)

    def flux(self, U):
        U = np.asarray(U, dtype=float)
        v, u = U[..., 0], U[..., 1]
        return np.stack((self.sigma * v - u, self.sigma * u + self.pressure(v)), axis=-1)

    def flux_jacobian(self, U):
        U = np.asarray(U, dtype=float)
        v = U[..., 0]
        J = np.zeros(U.shape[:-1] + (2, 2))
        J[..., 0, 0] = self.sigma
        J[..., 0, 1] = -1.0
        J[..., 1, 0] = self.pressure_derivative(v)
        J[..., 1, 1] = self.sigma
        return J

    def viscosity(self, U):
        U = np.asarray(U, dtype=float)
        B = np.zeros(U.shape[:-1] + (2, 2))
        B[..., 1, 1] = self.mu / U[..., 0]
        return B

    def viscosity_derivative(self, U):
        U = np.asarray(U, dtype=float)
        dB = np.zeros(U.shape[:-1] + (2, 2, 2))
        dB[..., 0, 1, 1] = -self.mu / U[..., 0] ** 2
        return dB

    def in_domain(self, U) -> bool:
        U = np.asarray(U, dtype=float)
        return bool(np.all(np.isfinite(U)) and np.all(U[..., 0] > 0))

    def domain_violation(self, U):
        U = np.asarray(U, dtype=float)
        return ~np.all(np.isfinite(U), axis=-1) | (U[..., 0] <= 0)

    def hyperbolic_component(self, v):
        velocity = float(np.asarray(v).reshape(-1)[0])
        return float(self.u_plus[0] + (velocity - self.u_plus[1]) / self.sigma)

    def shock_left_state(self):
        return np.array([self.v_minus, self.u_plus[1] + self.sigma * (self.v_minus - self.u_plus[0])])

    def describe(self):
        info = super().describe()
        info.update({"gamma": self.gamma, "viscosity": self.mu, "sigma": self.sigma,
                     "pressure_coefficient": self.a, "v_minus": self.v_minus})
        return info


class BurgersEmbeddingModel(Model):
    """双曲载流分量 w 与粘性 Burgers 分量 u 的嵌入

    F = (sigma w, u^2 / 2), B = diag(0, nu); 驻定剖面 u = -tanh((x - x0)/2) (nu = 1, u_+ = -1)。
    """

    def __init__(self, name: str, boundary_case: BoundaryCase, u_plus, u_boundary=None,
                 sigma: float = 1.0, viscosity: float = 1.0):
        if sigma == 0:
            raise ConfigError("sigma 不能为零 (特征边界)")
        if viscosity <= 0:
            raise ConfigError(f"粘性系数必须为正: {viscosity}")
        self.sigma = float(sigma)
        self.nu = float(viscosity)
        super().__init__(name, boundary_case, u_plus, u_boundary)

    @property
    def n(self) -> int:
        return 2

    def flux(self, U):
        U = np.asarray(U, dtype=float)
        return np.stack((self.sigma * U[..., 0], 0.5 * U[..., 1] ** 2), axis=-1)

    def flux_jacobian(self, U):
        U = np.asarray(U, dtype=float)
        J = np.zeros(U.shape[:-1] + (2, 2))
        J[..., 0, 0] = self.sigma
        J[..., 1, 1] = U[..., 1]
        return J

    def viscosity(self, U):
        U = np.asarray(U, dtype=float)
        B = np.zeros(U.shape[:-1] + (2, 2))
        B[..., 1, 1] = self.nu
        return B

    def hyperbolic_component(self, v):
        return float(self.u_plus[0])

    def shock_left_state(self):
        return np.array([self.u_plus[0], -self.u_plus[1]])


class LinearModel(Model):
    """常系数线性系统 F = A U, B 为常矩阵"""

    def __init__(self, name: str, boundary_case: BoundaryCase, u_plus, u_boundary=None,
                 flux_matrix=None, viscosity_matrix=None):
        if flux_matrix is None or viscosity_matrix is None:
            raise ConfigError("线性模型需要 flux_matrix 与 viscosity_matrix")
        self.A = np.asarray(flux_matrix, dtype=float)
        self.B = np.asarray(viscosity_matrix, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1] or self.A.shape != self.B.shape:
            raise ConfigError("flux_matrix 与 viscosity_matrix 必须是同阶方阵")
        self._n = self.A.shape[0]
        super().__init__(name, boundary_case, u_plus, u_boundary)

    @property
    def n(self) -> int:
        return self._n

    def flux(self, U):
        return np.asarray(U, dtype=float) @ self.A.T

    def flux_jacobian(self, U):
        U = np.asarray(U, dtype=float)
        return np.broadcast_to(self.A, U.shape[:-1] + self.A.shape).copy()

    def viscosity(self, U):
        U = np.asarray(U, dtype=float)
        return np.broadcast_to(self.B, U.shape[:-1] + self.B.shape).copy()

    def hyperbolic_component(self, v):
        if self.A[0, 0] == 0:
            raise ModelError("A11 = 0, 双曲约束不可解")
        dv = np.asarray(v, dtype=float) - self.u_plus[1:]
        return float(self.u_plus[0] - self.A[0, 1:] @ dv / self.A[0, 0])


class ModelFactory:
    """模型工厂"""

    @staticmethod
    def create_model(definition: Dict[str, Any]) -> Model:
        kind = definition.get('kind')
        name = definition.get('name', kind or 'custom')
        case = definition.get('boundary_case')
        params = definition.get('params', {}) or {}
        u_plus = definition.get('u_plus')
        u_boundary = definition.get('u_boundary')

        if case is None or u_plus is None:
            raise ConfigError(f"模型 {name} 缺少 boundary_case 或 u_plus")

        try:
            if kind == 'isentropic':
                return IsentropicGasModel(name, case, u_plus, u_boundary, **params)
            if kind == 'burgers_embedding':
                return BurgersEmbeddingModel(name, case, u_plus, u_boundary, **params)
            if kind == 'linear':
                return LinearModel(name, case, u_plus, u_boundary,
                                   flux_matrix=definition.get('flux_matrix'),
                                   viscosity_matrix=definition.get('viscosity_matrix'))
        except TypeError as e:
            raise ConfigError(f"模型 {name} 参数错误: {e}")

        raise ConfigError(f"不支持的模型类型: {kind}")


# ---------------------------------------------------------------------------
# 操作
# ---------------------------------------------------------------------------

def _checked_state(model: Model, U) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    if U.shape[-1] != model.n:
        raise ModelError(f"状态维数错误: 期望 {model.n}, 实际 {U.shape[-1]}")
    if not model.in_domain(U):
        raise ModelError(f"非物理状态 ({model.name}): {U}")
    return U


def eval_flux(model: Model, U) -> np.ndarray:
    """F(U)"""
    return model.flux(_checked_state(model, U))


def jacobian_A(model: Model, U) -> np.ndarray:
    """dF(U), 解析公式"""
    return model.flux_jacobian(_checked_state(model, U))


def finite_difference_jacobian(model: Model, U, eps: float = 1e-6) -> np.ndarray:
    """中心差分 Jacobian, 用于校验解析公式"""
    U = _checked_state(model, U)
    J = np.zeros((model.n, model.n))
    for k in range(model.n):
        step = eps * max(1.0, abs(U[k]))
        dU = np.zeros(model.n)
        dU[k] = step
        J[:, k] = (model.flux(U + dU) - model.flux(U - dU)) / (2 * step)
    return J


def split_blocks(M: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """按 (1, r) 分块: 返回 M11 (标量), M12 (1, r), M21 (r, 1), M22 (r, r)"""
    return float(M[0, 0]), M[0:1, 1:], M[1:, 0:1], M[1:, 1:]


def viscous_blocks(B: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """返回 b1 (r, 1), b2 (r, r)"""
    return B[1:, 0:1], B[1:, 1:]


def convection_with_correction(model: Model, U, U_x) -> np.ndarray:
    """A-bar = dF(U) - (dB(U) .) U_x, 即 A-bar V = dF V - (dB V) U_x"""
    U = np.asarray(U, dtype=float)
    U_x = np.asarray(U_x, dtype=float)
    A = model.flux_jacobian(U)
    dB = model.viscosity_derivative(U)
    # (dB V) U_x 的第 k 列为 dB[k] @ U_x
    correction = np.einsum('...kij,...j->...ik', dB, U_x)
    return A - correction


def reduced_quantities(model: Model, U, A: Optional[np.ndarray] = None,
                       dc: Optional[np.ndarray] = None) -> ReducedData:
    """约化双曲量 A_*, D_*, eta_*, L_*, R_*

    A 缺省为 dF(U) (常状态); 剖面上应传入 A-bar 以及 dc = d/dx (b2^{-1} b1)。
    """
    U = _checked_state(model, U)
    if A is None:
        A = model.flux_jacobian(U)
    b1, b2 = viscous_blocks(model.viscosity(U))

    if np.linalg.cond(b2) > B2_CONDITION_MAX:
        raise ModelError(f"b2 奇异 ({model.name}), 状态 {U}")

    c = linalg.solve(b2, b1)
    A11, A12, A21, A22 = split_blocks(np.asarray(A, dtype=float))
    A_star = A11 - float(A12 @ c)

    if dc is None:
        dc = np.zeros_like(c)
    dc = np.asarray(dc, dtype=float).reshape(c.shape)

    bracket = A21 - A22 @ c + c * A_star + b2 @ dc
    D_star = -float(A12 @ linalg.solve(b2, bracket))

    L_star = np.zeros(model.n)
    L_star[0] = 1.0
    R_star = np.concatenate(([1.0], -c[:, 0]))

    return ReducedData(A_star=A_star, D_star=D_star, eta_star=-D_star,
                       L_star=L_star, R_star=R_star)


def endpoint_characteristics(model: Model, imag_tol: float = 1e-10) -> EndpointData:
    """U_+ 处的特征值、双正交特征向量与扩散率 beta_j"""
    A_plus = jacobian_A(model, model.u_plus)
    B_plus = model.viscosity(model.u_plus)

    eigenvalues, right = linalg.eig(A_plus)
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    if np.max(np.abs(eigenvalues.imag)) > imag_tol * scale:
        raise ModelError(f"(H2) 违背: dF(U_+) 存在复特征值 {eigenvalues}")

    order = np.argsort(eigenvalues.real)
    a_plus = eigenvalues.real[order]
    right = np.real_if_close(right[:, order], tol=1e6).real

    if np.any(np.diff(a_plus) <= imag_tol * scale):
        raise ModelError(f"(H2) 违背: dF(U_+) 存在重特征值 {a_plus}")
    if np.any(np.abs(a_plus) <= imag_tol * scale):
        raise ModelError(f"(H2) 违背: dF(U_+) 存在零特征值 {a_plus}")

    right = right / np.linalg.norm(right, axis=0)
    left = linalg.inv(right)
    beta = np.einsum('ji,jk,ki->i', left.T, B_plus, right)
    biorth = float(np.max(np.abs(left @ right - np.eye(model.n))))

    violations = []
    for j, value in enumerate(beta):
        if value <= imag_tol:
            violations.append(f"beta_{j + 1} = {value:.3e} <= 0 (a = {a_plus[j]:.6g})")
            logger.warning(f"{model.name}: 扩散率 beta_{j + 1} 非正 ({value:.3e})")

    return EndpointData(a_plus=a_plus, l_plus=left, r_plus=right, beta_plus=beta,
                        biorthogonality_error=biorth, violations=violations)
