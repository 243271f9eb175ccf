"""
剖面系数表

把 A-bar = dF(U) - (dB(U) .) U_x, A-bar', B, b2^{-1} b1 以及约化量
A_*, eta_*, R_* 在剖面网格上制表, 并用三次样条插值。x >= X_max 时取端点值。
"""

from typing import Tuple

import numpy as np
from scipy import linalg
from scipy.interpolate import CubicSpline

from core.hp_model import Model, convection_with_correction, reduced_quantities, viscous_blocks
from data.models import Profile
from utils.exceptions import ModelError
from utils.logger import get_logger

logger = get_logger(__name__)


def fornberg_weights(z: float, nodes: np.ndarray, order: int) -> np.ndarray:
    """任意节点上的有限差分权重, 返回 (order+1, len(nodes))"""
    n = len(nodes)
    weights = np.zeros((order + 1, n))
    c1 = 1.0
    c4 = nodes[0] - z
    weights[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - z
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    weights[k, i] = c1 * (k * weights[k - 1, i - 1] - c5 * weights[k, i - 1]) / c2
                weights[0, i] = -c1 * c5 * weights[0, i - 1] / c2
            for k in range(mn, 0, -1):
                weights[k, j] = (c4 * weights[k, j] - k * weights[k - 1, j]) / c3
            weights[0, j] = c4 * weights[0, j] / c3
        c1 = c2
    return weights


def grid_derivative(x: np.ndarray, values: np.ndarray, width: int = 5) -> np.ndarray:
    """四阶有限差分求导: 内部中心五点, 端点单侧, 沿第 0 轴"""
    x = np.asarray(x, dtype=float)
    values = np.asarray(values)
    if x.size < width:
        raise ModelError(f"网格点数 {x.size} 少于差分模板宽度 {width}")
    half = width // 2
    result = np.zeros_like(values, dtype=np.result_type(values.dtype, float))
    for i in range(x.size):
        start = min(max(i - half, 0), x.size - width)
        stencil = slice(start, start + width)
        w = fornberg_weights(x[i], x[stencil], 1)[1]
        result[i] = np.tensordot(w, values[stencil], axes=(0, 0))
    return result


class ProfileCoefficients:
    """沿剖面的系数表与样条"""

    def __init__(self, model: Model, profile: Profile):
        self.model = model
        self.profile = profile
        self.grid = profile.grid
        self.x_max = profile.x_max
        n = model.n

        self.Abar = convection_with_correction(model, profile.values, profile.derivatives)
        self.Abar_prime = grid_derivative(self.grid, self.Abar)
        self.B = model.viscosity(profile.values)

        self.c = np.array([linalg.solve(b2, b1) for b1, b2 in map(viscous_blocks, self.B)])
        self.c_prime = grid_derivative(self.grid, self.c)

        reduced = [reduced_quantities(model, U, A=A, dc=dc)
                   for U, A, dc in zip(profile.values, self.Abar, self.c_prime)]
        self.A_star = np.array([item.A_star for item in reduced])
        self.eta_star = np.array([item.eta_star for item in reduced])
        self.R_star = np.array([item.R_star for item in reduced])

        self.A_plus = model.flux_jacobian(model.u_plus)
        self.B_plus = model.viscosity(model.u_plus)

        self._Abar_spline = CubicSpline(self.grid, self.Abar, axis=0)
        self._Abar_prime_spline = CubicSpline(self.grid, self.Abar_prime, axis=0)
        self._B_spline = CubicSpline(self.grid, self.B, axis=0)
        self._c_spline = CubicSpline(self.grid, self.c, axis=0)
        self.constant = bool(np.allclose(self.Abar, self.A_plus[None], rtol=0, atol=1e-14)
                             and np.allclose(self.B, self.B_plus[None], rtol=0, atol=1e-14))
        self.n = n

    @property
    def min_abs_A_star(self) -> float:
        return float(np.min(np.abs(self.A_star)))

    def at(self, x: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """返回 x 处的 (A-bar, A-bar', B)"""
        if x >= self.x_max:
            return self.A_plus, np.zeros_like(self.A_plus), self.B_plus
        x = max(float(x), 0.0)
        return self._Abar_spline(x), self._Abar_prime_spline(x), self._B_spline(x)

    def tabulate(self, x: np.ndarray, x_max: float = None) -> Tuple[np.ndarray, np.ndarray]:
        """在一组点上返回 (A-bar, B), x >= x_max 处取端点值"""
        x = np.asarray(x, dtype=float)
        cutoff = min(self.x_max, x_max) if x_max is not None else self.x_max
        inside = x < cutoff
        A = np.broadcast_to(self.A_plus, x.shape + self.A_plus.shape).copy()
        B = np.broadcast_to(self.B_plus, x.shape + self.B_plus.shape).copy()
        if np.any(inside):
            clipped = np.clip(x[inside], 0.0, None)
            A[inside] = self._Abar_spline(clipped)
            B[inside] = self._B_spline(clipped)
        return A, B

    def duality_blocks(self, x: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """返回 (A-bar, c, c'), c = b2^{-1} b1"""
        if x >= self.x_max:
            return self.A_plus, self._c_spline(self.x_max), np.zeros_like(self.c[0])
        x = max(float(x), 0.0)
        return self._Abar_spline(x), self._c_spline(x), self._c_spline(x, 1)


class ReducedField:
    """A_*, eta_*, R_* 的样条及其原函数, x > X_max 时常值延拓"""

    def __init__(self, coefficients: ProfileCoefficients):
        self.x_max = coefficients.x_max
        grid = coefficients.grid
        A = coefficients.A_star
        if np.any(A == 0) or (A.max() > 0 and A.min() < 0):
            raise ModelError("A_* 沿剖面变号或为零, 特征线不确定")

        self._A = CubicSpline(grid, A)
        self._eta = CubicSpline(grid, coefficients.eta_star)
        self._R = CubicSpline(grid, coefficients.R_star, axis=0)
        self._tau = CubicSpline(grid, 1.0 / A).antiderivative()
        self._damp = CubicSpline(grid, coefficients.eta_star / A).antiderivative()

        self.A_end = float(A[-1])
        self.eta_end = float(coefficients.eta_star[-1])
        self.R_end = coefficients.R_star[-1]
        self.L_star = np.eye(coefficients.n)[0]
        self.sign = 1.0 if A[0] > 0 else -1.0
        self._tau_end = float(self._tau(self.x_max))
        self._damp_end = float(self._damp(self.x_max))

    def A(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= self.x_max, self.A_end, self._A(np.clip(x, 0.0, self.x_max)))

    def eta(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= self.x_max, self.eta_end, self._eta(np.clip(x, 0.0, self.x_max)))

    def R(self, x: float) -> np.ndarray:
        if x >= self.x_max:
            return self.R_end
        return self._R(max(float(x), 0.0))

    def tau(self, x):
        """int_0^x dz / A_*(z)"""
        x = np.asarray(x, dtype=float)
        inside = self._tau(np.clip(x, 0.0, self.x_max))
        return np.where(x >= self.x_max, self._tau_end + (x - self.x_max) / self.A_end, inside)

    def damping(self, x):
        """int_0^x eta_*(z) / A_*(z) dz"""
        x = np.asarray(x, dtype=float)
        inside = self._damp(np.clip(x, 0.0, self.x_max))
        return np.where(x >= self.x_max, self._damp_end + (x - self.x_max) * self.eta_end / self.A_end, inside)

    def attenuation(self, y, x):
        """exp(-int_y^x eta_*/A_*)"""
        return np.exp(-(self.damping(x) - self.damping(y)))

    def density_factor(self, y, x):
        """A_*(y) / A_*(x) exp(-int_y^x eta_*/A_*)"""
        return self.A(y) / self.A(x) * self.attenuation(y, x)
