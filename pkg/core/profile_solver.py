"""
边界层剖面求解模块

驻定方程积分一次后, 双曲行化为代数约束 F^I(u, v) = F^I(U_+),
抛物行给出 v 的一阶 ODE:
    (b2 - b1 dF11^{-1} dF12) v' = F^II(U) - F^II(U_+)
"""

from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from core.hp_model import Model, split_blocks, viscous_blocks
from data.models import DecayBound, DecayCertificate, Profile, ProfileConfig
from utils.exceptions import ModelError, ProfileError
from utils.logger import get_logger

logger = get_logger(__name__)

# 稳定流形上的起始偏移 (相对)
MANIFOLD_OFFSET = 1e-8
# 剖面导数的有限差分步长
RESIDUAL_STEP = 1e-3
DIRECTIONAL_STEP = 1e-6


def integrated_profile_ode(model: Model, U, U_prime=None) -> np.ndarray:
    """积分一次的剖面方程残差 F(U) - F(U_+) - B(U) U'

    第一行为代数约束 F^I(U) - F^I(U_+), 其余行确定 v'。
    """
    U = np.asarray(U, dtype=float)
    if not model.in_domain(U):
        raise ModelError(f"非物理状态 ({model.name}): {U}")
    if U_prime is None:
        U_prime = np.zeros(model.n)
    residual = model.flux(U) - model.flux(model.u_plus)
    residual = residual - model.viscosity(U) @ np.asarray(U_prime, dtype=float)
    return residual


def constrained_state(model: Model, v) -> np.ndarray:
    """由抛物分量 v 与双曲约束拼出完整状态"""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return np.concatenate(([model.hyperbolic_component(v)], v))


def _constraint_slope(model: Model, U: np.ndarray) -> np.ndarray:
    """约束流形的切向 du/dv = -dF11^{-1} dF12, 形状 (1, r)"""
    A11, A12, _, _ = split_blocks(model.flux_jacobian(U))
    if abs(A11) < 1e-14:
        raise ProfileError(f"dF11 在 {U} 处为零, 双曲约束退化")
    return -A12 / A11


def _reduced_matrix(model: Model, U: np.ndarray) -> np.ndarray:
    b1, b2 = viscous_blocks(model.viscosity(U))
    return b2 + b1 @ _constraint_slope(model, U)


def profile_rhs(model: Model, v) -> np.ndarray:
    """约化剖面 ODE 的右端 v' = M(U)^{-1} (F^II(U) - F^II(U_+))"""
    U = constrained_state(model, v)
    if not model.in_domain(U):
        raise ProfileError(f"剖面离开物理定义域: {U}")
    rhs = (model.flux(U) - model.flux(model.u_plus))[1:]
    try:
        return linalg.solve(_reduced_matrix(model, U), rhs)
    except linalg.LinAlgError as e:
        raise ProfileError(f"约化粘性矩阵奇异: {e}")


def state_derivative(model: Model, v) -> Tuple[np.ndarray, np.ndarray]:
    """返回 (U, U')"""
    U = constrained_state(model, v)
    dv = profile_rhs(model, v)
    du = float(_constraint_slope(model, U) @ dv)
    return U, np.concatenate(([du], dv))


def rest_point_linearization(model: Model) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """约化 ODE 在 v_+ 处的 Jacobian 及其特征分解"""
    U = model.u_plus
    _, _, A21, A22 = split_blocks(model.flux_jacobian(U))
    J = linalg.solve(_reduced_matrix(model, U), A21 @ _constraint_slope(model, U) + A22)
    eigenvalues, vectors = linalg.eig(J)
    return J, eigenvalues, vectors


def profile_grid(x_max: float, first_spacing: float, growth_ratio: float, tail_cells: int) -> np.ndarray:
    """边界附近几何加密, 尾部均匀的网格"""
    tail_spacing = x_max / tail_cells
    nodes = [0.0]
    spacing = min(first_spacing, tail_spacing)
    while nodes[-1] + spacing < x_max and spacing < tail_spacing:
        nodes.append(nodes[-1] + spacing)
        spacing *= growth_ratio
    remaining = x_max - nodes[-1]
    count = max(1, int(np.ceil(remaining / tail_spacing)))
    tail = np.linspace(nodes[-1], x_max, count + 1)[1:]
    return np.concatenate((np.array(nodes), tail))


def _five_point_derivative(func: Callable[[float], np.ndarray], x: float, delta: float,
                           lower: float, upper: float) -> np.ndarray:
    """五点差分 (内部中心, 端点单侧)"""
    if x - 2 * delta >= lower and x + 2 * delta <= upper:
        return (func(x - 2 * delta) - 8 * func(x - delta) + 8 * func(x + delta) - func(x + 2 * delta)) / (12 * delta)
    if x - 2 * delta < lower:
        samples = [func(x + k * delta) for k in range(5)]
        return (-25 * samples[0] + 48 * samples[1] - 36 * samples[2] + 16 * samples[3] - 3 * samples[4]) / (12 * delta)
    samples = [func(x - k * delta) for k in range(5)]
    return (25 * samples[0] - 48 * samples[1] + 36 * samples[2] - 16 * samples[3] + 3 * samples[4]) / (12 * delta)


class ProfileSolver:
    """剖面求解器"""

    def __init__(self, model: Model, config: Optional[ProfileConfig] = None):
        self.model = model
        self.config = config or ProfileConfig()
        self.v_plus = model.u_plus[1:]
        self.v_boundary = model.u_boundary[1:]

    def solve(self, x_max: Optional[float] = None, certify: bool = True) -> Profile:
        """求解剖面"""
        model = self.model
        _, eigenvalues, vectors = rest_point_linearization(model)
        stable = np.where(eigenvalues.real < 0)[0]
        amplitude = float(np.linalg.norm(model.u_boundary - model.u_plus))

        if stable.size:
            theta_est = float(np.min(np.abs(eigenvalues.real[stable])))
        elif amplitude == 0.0:
            theta_est = 1.0
        else:
            raise ProfileError(f"{model.name}: 静止点 U_+ 没有稳定方向, 不存在连接")

        X = x_max or self.config.x_max or self.config.decay_factor / theta_est
        logger.info(f"求解剖面 {model.name}: theta_est={theta_est:.6g}, X_max={X:.6g}")

        if amplitude == 0.0:
            evaluate, x0_candidates = self._constant_branch()
        elif stable.size == model.r:
            evaluate, x0_candidates = self._forward_branch(X)
        elif stable.size == 1:
            index = stable[0]
            direction = np.real(vectors[:, index])
            evaluate, x0_candidates = self._shooting_branch(X, float(eigenvalues.real[index]), direction)
        else:
            raise ProfileError(
                f"{model.name}: 稳定流形维数 {stable.size} 与抛物维数 {model.r} 不匹配, 无法匹配边界值")

        grid = profile_grid(X, self.config.first_spacing, self.config.growth_ratio, self.config.tail_cells)
        profile = self._tabulate(grid, evaluate, theta_est, x0_candidates)

        if certify:
            profile = profile.with_decay(verify_decay(profile, self.config.k_max))
        return profile

    def _check_boundary_compatibility(self) -> np.ndarray:
        U0 = constrained_state(self.model, self.v_boundary)
        mismatch = abs(U0[0] - self.model.u_boundary[0])
        if mismatch > 1e-8 * max(1.0, abs(U0[0])):
            if self.model.boundary_case == "inflow":
                raise ProfileError(
                    f"流入边界值与双曲约束不相容: u(0)={self.model.u_boundary[0]}, 约束给出 {U0[0]}")
            logger.info(f"流出情形双曲分量由约束确定: u(0)={U0[0]:.10g}")
        return U0

    def _constant_branch(self):
        logger.info("边界值与 U_+ 相同, 剖面为常状态")
        u_plus = self.model.u_plus

        def evaluate(x):
            return u_plus.copy()

        return evaluate, []

    def _forward_branch(self, X: float):
        """全部抛物方向稳定: 由 v0 正向积分"""
        self._check_boundary_compatibility()
        model = self.model

        solution = solve_ivp(lambda x, v: profile_rhs(model, v), (0.0, X), self.v_boundary,
                             method='DOP853', rtol=self.config.rtol, atol=self.config.atol,
                             dense_output=True)
        if not solution.success:
            raise ProfileError(f"剖面积分失败: {solution.message}")

        dense = solution.sol

        def evaluate(x):
            return constrained_state(model, dense(min(max(x, 0.0), X)))

        return evaluate, self._shock_offsets()

    def _shooting_branch(self, X: float, mu: float, direction: np.ndarray):
        """一维稳定流形: 从 U_+ 附近沿稳定特征向量反向打靶, 事件为 v_1 = v0_1"""
        model = self.model
        target = self.v_boundary
        scale = max(1.0, float(np.linalg.norm(target - self.v_plus)))
        candidates = []

        def hit(x, v):
            return v[0] - target[0]

        for sign in (1.0, -1.0):
            start = self.v_plus + sign * MANIFOLD_OFFSET * scale * direction
            try:
                solution = solve_ivp(lambda x, v: profile_rhs(model, v), (0.0, -X), start,
                                     method='DOP853', rtol=self.config.rtol, atol=self.config.atol,
                                     dense_output=True, events=hit)
            except ProfileError as e:
                logger.debug(f"打靶分支 {sign:+.0f} 离开定义域: {e}")
                continue
            for xi, state in zip(solution.t_events[0], solution.y_events[0]):
                mismatch = float(np.linalg.norm(state - target))
                if mismatch <= 1e-6 * scale:
                    candidates.append((float(-xi), sign, solution.sol, start))

        if not candidates:
            raise ProfileError(f"{model.name}: 在 X_max={X:.4g} 内未找到与边界值匹配的连接")

        candidates.sort(key=lambda item: item[0])
        length, sign, dense, start = candidates[0]
        logger.info(f"打靶找到 {len(candidates)} 个候选, 取最短连接 L={length:.6g}")
        v_plus = self.v_plus

        def evaluate(x):
            if x <= length:
                return constrained_state(model, dense(x - length))
            # 线性化尾部
            return constrained_state(model, v_plus + (start - v_plus) * np.exp(mu * (x - length)))

        offsets = self._shock_offsets()
        if not offsets:
            offsets = [length for length, _, _, _ in candidates]
        return evaluate, offsets

    def _shock_offsets(self) -> List[float]:
        """驻定激波截断位移候选: 激波中心 (抛物分量中点) 相对边界的位置"""
        left = self.model.shock_left_state()
        if left is None:
            return []
        model = self.model
        midpoint = 0.5 * (left[1] + model.u_plus[1])
        X = self.config.decay_factor * 10.0

        def crossing(x, v):
            return v[0] - midpoint

        offsets = []
        for span in ((0.0, X), (0.0, -X)):
            try:
                solution = solve_ivp(lambda x, v: profile_rhs(model, v), span, self.v_boundary,
                                     method='DOP853', rtol=self.config.rtol, atol=self.config.atol,
                                     events=crossing)
            except ProfileError as e:
                logger.debug(f"激波截断搜索离开定义域: {e}")
                continue
            offsets.extend(float(x) for x in solution.t_events[0])
        return sorted(set(round(x, 12) for x in offsets))

    def _tabulate(self, grid: np.ndarray, evaluate, theta_est: float, x0_candidates: List[float]) -> Profile:
        model = self.model
        values = np.array([evaluate(x) for x in grid])
        derivatives = np.zeros_like(values)
        second = np.zeros_like(values)

        for i, U in enumerate(values):
            v = U[1:]
            _, dU = state_derivative(model, v)
            derivatives[i] = dU
            norm = float(np.linalg.norm(dU[1:]))
            if norm == 0.0:
                continue
            eps = DIRECTIONAL_STEP / norm
            _, forward = state_derivative(model, v + eps * dU[1:])
            _, backward = state_derivative(model, v - eps * dU[1:])
            second[i] = (forward - backward) / (2 * eps)

        X = float(grid[-1])
        residual_max = 0.0
        for x, U in zip(grid, values):
            dU = _five_point_derivative(evaluate, float(x), RESIDUAL_STEP, 0.0, X)
            residual_max = max(residual_max, float(np.max(np.abs(integrated_profile_ode(model, U, dU)[1:]))))
        first_integral = model.flux(values)[:, 0] - model.flux(model.u_plus)[0]
        first_integral_max = float(np.max(np.abs(first_integral)))

        amplitude = float(np.linalg.norm(model.u_plus - values[0]))
        tail_error = float(np.linalg.norm(values[-1] - model.u_plus))
        if tail_error > 1e-8 * amplitude:
            raise ProfileError(
                f"剖面在 X_max={X:.4g} 处未收敛到 U_+: 偏差 {tail_error:.3e}, 请增大 X_max")

        x0 = next((x for x in x0_candidates if x >= 0), None)
        if len(x0_candidates) > 1:
            logger.warning(f"找到多个截断位移候选 {x0_candidates}, 取 x0={x0}")

        logger.info(f"剖面完成: 节点 {grid.size}, 残差 {residual_max:.2e}, 首次积分偏差 {first_integral_max:.2e}")
        return Profile(grid=grid, values=values, derivatives=derivatives, second_derivatives=second,
                       u_plus=model.u_plus.copy(), boundary_case=model.boundary_case,
                       theta_est=theta_est, x0=x0, x0_candidates=list(x0_candidates),
                       residual_max=residual_max, first_integral_max=first_integral_max)


def solve_profile(model: Model, x_max: Optional[float] = None,
                  config: Optional[ProfileConfig] = None, certify: bool = True) -> Profile:
    """求解边界层剖面并附上衰减证书"""
    try:
        return ProfileSolver(model, config).solve(x_max=x_max, certify=certify)
    except (ProfileError, ModelError):
        raise
    except Exception as e:
        logger.error(f"剖面求解失败: {e}")
        raise ProfileError(f"剖面求解失败: {e}")


def verify_decay(profile: Profile, k_max: int = 2, window: Optional[Tuple[float, float]] = None,
                 noise_rel: float = 1e-11) -> DecayCertificate:
    """拟合 |d^k(U - U_+)| <= C exp(-theta x), k = 0..k_max

    默认窗口为可分辨范围 (偏差高于噪声底) 的后半段。
    """
    fields = [profile.values - profile.u_plus, profile.derivatives, profile.second_derivatives]
    grid = profile.grid
    bounds = []

    for k in range(k_max + 1):
        deviation = np.linalg.norm(fields[k], axis=1)
        peak = float(np.max(deviation))
        if peak == 0.0:
            bounds.append(DecayBound(order=k, C=0.0, theta=float('inf'), exact_zero=True))
            continue

        if window is None:
            resolved = np.where(deviation > noise_rel * peak)[0]
            x_last = float(grid[resolved[-1]])
            lo, hi = 0.5 * x_last, x_last
        else:
            lo, hi = window
        mask = (grid >= lo) & (grid <= hi) & (deviation > 0)
        if np.count_nonzero(mask) < 4:
            raise ProfileError(f"衰减拟合点数不足 (k={k}, 窗口 [{lo:.4g}, {hi:.4g}])")

        slope, intercept = np.polyfit(grid[mask], np.log(deviation[mask]), 1)
        theta = float(-slope)
        if theta <= 0:
            raise ProfileError(f"衰减证书失败: k={k} 拟合衰减率 theta={theta:.4g} <= 0")

        C = max(float(np.exp(intercept)), float(np.max(deviation[mask] * np.exp(theta * grid[mask]))))
        bounds.append(DecayBound(order=k, C=C, theta=theta, window=[float(lo), float(hi)]))
        logger.debug(f"衰减拟合 k={k}: C={C:.4g}, theta={theta:.6g}")

    return DecayCertificate(bounds=bounds)
