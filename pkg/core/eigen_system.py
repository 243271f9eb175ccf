"""
特征值 ODE 系统

相变量 W = (u, v, z), z = b1 u' + b2 v', 维数 N = 2n - 1:
    u' = A_*^{-1} (-(A11' + lam) u - A12' v - A12 b2^{-1} z)
    v' = b2^{-1} z - b2^{-1} b1 u'
    z' = (A21 - A22 b2^{-1} b1) u' + A21' u + (A22' + lam) v + A22 b2^{-1} z
"""

from abc import ABC, abstractmethod
from typing import Optional

import numpy as np
from scipy import linalg

from core.coefficients import ProfileCoefficients
from core.hp_model import Model, split_blocks, viscous_blocks
from core.magnus import MAX_STEP_GROWTH
from data.models import BoundaryCase, Profile
from utils.exceptions import ConfigError, EvansError
from utils.logger import get_logger

logger = get_logger(__name__)

A_STAR_MIN = 1e-6


def assemble_matrix(A: np.ndarray, dA: np.ndarray, B: np.ndarray, lam: complex) -> np.ndarray:
    """由 A-bar, A-bar', B 组装 A(x, lam)"""
    n = A.shape[0]
    N = 2 * n - 1
    b1, b2 = viscous_blocks(B)
    binv = linalg.inv(b2)
    c = binv @ b1
    A11, A12, A21, A22 = split_blocks(A)
    dA11, dA12, dA21, dA22 = split_blocks(dA)
    a_star = A11 - float(A12 @ c)

    row_u = np.concatenate(([-(dA11 + lam)], -dA12[0], -(A12 @ binv)[0])) / a_star
    M = np.zeros((N, N), dtype=complex)
    M[0] = row_u
    M[1:n] = -c @ row_u[None, :]
    M[1:n, n:] += binv
    M[n:] = (A21 - A22 @ c) @ row_u[None, :]
    M[n:, 0] += dA21[:, 0]
    M[n:, 1:n] += dA22 + lam * np.eye(n - 1)
    M[n:, n:] += A22 @ binv
    return M


def endpoint_matrix(model: Model, lam: complex) -> np.ndarray:
    """常状态 U_+ 处的极限矩阵 A_+(lam)"""
    A_plus = model.flux_jacobian(model.u_plus)
    return assemble_matrix(A_plus, np.zeros_like(A_plus), model.viscosity(model.u_plus), lam)


class EigenSystem(ABC):
    """W' = A(x, lam) W 的抽象描述"""

    name: str = "eigen_system"
    n: int
    N: int
    k: int
    x_max: float
    boundary_case: BoundaryCase = "inflow"
    constant: bool = False

    @abstractmethod
    def matrix(self, x: float, lam: complex) -> np.ndarray:
        """系数矩阵 A(x, lam)"""
        pass

    @property
    @abstractmethod
    def boundary_matrix(self) -> np.ndarray:
        """x = 0 处的边界矩阵, 形状 (k, N)"""
        pass

    @property
    def nodes(self) -> np.ndarray:
        """参考网格 (积分步必须落在这些点上)"""
        return np.array([0.0, self.x_max])

    @property
    def hyperbolic_speed_min(self) -> float:
        return np.inf

    def limit_matrix(self, lam: complex) -> np.ndarray:
        return self.matrix(self.x_max, lam)

    def step_cap(self, lam: complex, step_factor: float = 0.5) -> float:
        """Magnus 步长上限"""
        scale = max(float(np.linalg.norm(self.limit_matrix(lam), 2)), 1e-12)
        cap = MAX_STEP_GROWTH / scale
        modulus = abs(lam)
        if not self.constant and modulus > 0:
            cap = min(cap, step_factor / np.sqrt(modulus),
                      8.0 * step_factor * self.hyperbolic_speed_min / modulus)
        if not self.constant:
            spacing = np.diff(self.nodes)
            cap = min(cap, float(np.max(spacing)) if spacing.size else cap)
        return cap

    def stable_dimension(self, lam: complex) -> int:
        return int(np.sum(np.linalg.eigvals(self.limit_matrix(lam)).real < 0))

    def at(self, lam: complex) -> "EigenSystemAtLambda":
        return EigenSystemAtLambda(self, complex(lam))


class EigenSystemAtLambda:
    """固定 lam 的特征系统"""

    def __init__(self, system: EigenSystem, lam: complex):
        self.system = system
        self.lam = lam

    def matrix(self, x: float) -> np.ndarray:
        return self.system.matrix(x, self.lam)

    def limit_matrix(self) -> np.ndarray:
        return self.system.limit_matrix(self.lam)

    @property
    def N(self) -> int:
        return self.system.N


class HPEigenSystem(EigenSystem):
    """由模型与剖面组装的双曲-抛物特征系统"""

    def __init__(self, model: Model, profile: Profile, coefficients: Optional[ProfileCoefficients] = None,
                 x_max: Optional[float] = None):
        self.model = model
        self.profile = profile
        self.coefficients = coefficients or ProfileCoefficients(model, profile)
        self.name = model.name
        self.n = model.n
        self.N = 2 * model.n - 1
        self.boundary_case = model.boundary_case
        self.k = model.n if model.boundary_case == "inflow" else model.n - 1
        self.x_max = float(x_max or profile.x_max)
        self.constant = self.coefficients.constant

        speed = self.coefficients.min_abs_A_star
        if speed < A_STAR_MIN:
            raise EvansError(f"特征退化: 沿剖面 min|A_*| = {speed:.3e}")
        self._speed = speed
        self._boundary = self._assemble_boundary_matrix()

    @property
    def nodes(self) -> np.ndarray:
        grid = self.profile.grid
        return np.unique(np.concatenate((grid[grid < self.x_max], [self.x_max])))

    @property
    def hyperbolic_speed_min(self) -> float:
        return self._speed

    def _coefficients(self, x: float):
        if x >= self.x_max:
            c = self.coefficients
            return c.A_plus, np.zeros_like(c.A_plus), c.B_plus
        return self.coefficients.at(x)

    def matrix(self, x: float, lam: complex) -> np.ndarray:
        A, dA, B = self._coefficients(x)
        return assemble_matrix(A, dA, B, lam)

    def _assemble_boundary_matrix(self) -> np.ndarray:
        return boundary_matrix(self.model, self.boundary_case, self.profile.values[0])

    @property
    def boundary_matrix(self) -> np.ndarray:
        return self._boundary


class PlantedEigenvalueSystem(EigenSystem):
    """v'' + q(x) v = lam v, q = 6 sech^2 x + lam_star - 1, Dirichlet v(0) = 0

    半直线上唯一的 L^2 特征值位于 lam_star, 特征函数 tanh(x) sech(x)。
    """

    def __init__(self, lam_star: float = 0.3, x_max: float = 20.0, spacing: float = 0.01):
        self.name = "planted_eigenvalue"
        self.lam_star = float(lam_star)
        self.n, self.N, self.k = 1, 2, 1
        self.x_max = float(x_max)
        self._nodes = np.linspace(0.0, self.x_max, int(round(self.x_max / spacing)) + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    def potential(self, x: float) -> float:
        if x >= self.x_max:
            return self.lam_star - 1.0
        return 6.0 / np.cosh(x) ** 2 + self.lam_star - 1.0

    def matrix(self, x: float, lam: complex) -> np.ndarray:
        return np.array([[0.0, 1.0], [lam - self.potential(x), 0.0]], dtype=complex)

    @property
    def boundary_matrix(self) -> np.ndarray:
        return np.array([[1.0, 0.0]])


class ScalarParabolicSystem(EigenSystem):
    """常系数 lam u + a u' = b u'', Dirichlet u(0) = 0; W = (u, u')"""

    def __init__(self, a: float = 1.0, b: float = 1.0, x_max: float = 10.0):
        if b <= 0:
            raise ConfigError(f"扩散系数必须为正: {b}")
        self.name = "scalar_parabolic"
        self.a, self.b = float(a), float(b)
        self.n, self.N, self.k = 1, 2, 1
        self.x_max = float(x_max)
        self.constant = True

    def matrix(self, x: float, lam: complex) -> np.ndarray:
        return np.array([[0.0, 1.0], [lam / self.b, self.a / self.b]], dtype=complex)

    @property
    def boundary_matrix(self) -> np.ndarray:
        return np.array([[1.0, 0.0]])

    def decaying_rate(self, lam: complex) -> complex:
        """mu_- = (a - sqrt(a^2 + 4 b lam)) / (2 b)"""
        return (self.a - np.sqrt(self.a ** 2 + 4 * self.b * lam + 0j)) / (2 * self.b)


def boundary_matrix(model: Model, case: BoundaryCase, U0: Optional[np.ndarray] = None) -> np.ndarray:
    """W 坐标下的边界矩阵: 流入 [I_n, 0]; 流出 [b1(0), b2(0), 0]"""
    n, r = model.n, model.n - 1
    if case == "inflow":
        return np.hstack((np.eye(n), np.zeros((n, r))))
    if case == "outflow":
        B0 = model.viscosity(model.u_boundary if U0 is None else U0)
        return np.hstack((B0[1:, :], np.zeros((r, r))))
    raise ConfigError(f"未知的边界类型: {case}")


def boundary_kernel_basis(boundary: np.ndarray) -> np.ndarray:
    """ker B 的基, 第一列缩放使 det(B^*, V0) = 1"""
    boundary = np.atleast_2d(np.asarray(boundary))
    rows, N = boundary.shape
    if np.linalg.matrix_rank(boundary) != rows:
        raise ConfigError(f"边界矩阵秩亏: rank < {rows}")
    V0 = linalg.null_space(boundary).astype(complex)
    if V0.shape[1] != N - rows:
        raise ConfigError("边界矩阵核空间维数不正确")
    det = np.linalg.det(np.hstack((boundary.conj().T, V0)))
    V0[:, 0] /= det
    return V0


def build_eigen_system(model: Model, profile: Profile, lam: Optional[complex] = None,
                       x_max: Optional[float] = None,
                       coefficients: Optional[ProfileCoefficients] = None):
    """组装特征系统; 给定 lam 时返回固定 lam 的视图"""
    system = HPEigenSystem(model, profile, coefficients=coefficients, x_max=x_max)
    logger.debug(f"特征系统 {system.name}: N={system.N}, k={system.k}, X={system.x_max:.4g}")
    return system if lam is None else system.at(lam)
