"""
预解核 G_lambda(x, y) 及其结构检验

G_lambda 为 (lambda - L)^{-1} 的核, 由对偶表示组装:
    x > y:  G = -(I_n, 0) F^{y->x} Pi_y^+ S~(y)^{-1} (I_n, 0)^T
    x < y:  G = +(I_n, 0) F^{y->x} Pi_y^0 S~(y)^{-1} (I_n, 0)^T
Pi^+ / Pi^0 为沿边界子空间 / 衰减子空间的投影。
"""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, sparse
from scipy.optimize import linear_sum_assignment
from scipy.sparse.linalg import splu

from core.coefficients import ReducedField
from core.eigen_system import HPEigenSystem, boundary_kernel_basis, endpoint_matrix
from core.hp_model import Model, endpoint_characteristics, split_blocks, viscous_blocks
from core.magnus import fundamental_flow, magnus4_propagator, orthogonal_frames, step_nodes
from core.subspace import initial_frame
from data.models import HighFrequencyReport, LowFrequencyReport, ResolventSample
from utils.exceptions import BoundaryLayerError, ResolventError
from utils.logger import get_logger
from utils.parallel import parallel_map

logger = get_logger(__name__)


class DualityMatrix:
    """S~(x): S~ W = (-(A11 u + A12 v), -(A21 u + A22 v) + z, -(c u + v)), c = b2^{-1} b1"""

    def __init__(self, system: HPEigenSystem):
        self.system = system
        self.coefficients = system.coefficients
        self.n, self.N = system.n, system.N
        b1, b2 = viscous_blocks(self.coefficients.B_plus)
        self._c_plus = linalg.solve(b2, b1)

    def blocks(self, x: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        if x >= self.system.x_max:
            return self.coefficients.A_plus, self._c_plus, np.zeros_like(self._c_plus)
        return self.coefficients.duality_blocks(x)

    def matrix(self, x: float) -> np.ndarray:
        n, N = self.n, self.N
        A, c, _ = self.blocks(x)
        S = np.zeros((N, N))
        S[:n, :n] = -A
        S[1:n, n:] = np.eye(n - 1)
        S[n:, 0] = -c[:, 0]
        S[n:, 1:n] = -np.eye(n - 1)
        return S

    def inverse(self, x: float) -> np.ndarray:
        """闭式逆: u = -(p - A12 s)/A_*, v = -s - c u, z = q + A21 u + A22 v"""
        n, N = self.n, self.N
        A, c, _ = self.blocks(x)
        A11, A12, A21, A22 = split_blocks(A)
        a_star = A11 - float(A12 @ c)
        if abs(a_star) < 1e-12:
            raise ResolventError(f"x={x:.6g} 处 A_* 退化, S~ 不可逆")

        Sinv = np.zeros((N, N))
        Sinv[0, 0] = -1.0 / a_star
        Sinv[0, n:] = A12[0] / a_star
        Sinv[1:n] = -c @ Sinv[:1]
        Sinv[1:n, n:] -= np.eye(n - 1)
        Sinv[n:] = A21 @ Sinv[:1] + A22 @ Sinv[1:n]
        Sinv[n:, 1:n] += np.eye(n - 1)
        return Sinv

    def derivative(self, x: float) -> np.ndarray:
        n, N = self.n, self.N
        dS = np.zeros((N, N))
        if x >= self.system.x_max:
            return dS
        _, dA, _ = self.coefficients.at(x)
        _, _, dc = self.blocks(x)
        dS[:n, :n] = -dA
        dS[n:, 0] = -dc[:, 0]
        return dS

    def adjoint_matrix(self, x: float, lam: complex) -> np.ndarray:
        """伴随系统 Xi' = A~ Xi, A~^* = -(S~' + S~ A) S~^{-1}"""
        S = self.matrix(x)
        A = self.system.matrix(x, lam)
        return (-(self.derivative(x) + S @ A) @ self.inverse(x)).conj().T

    def identity_error(self, x: float) -> float:
        return float(np.max(np.abs(self.matrix(x) @ self.inverse(x) - np.eye(self.N))))


def relative_drift(values: np.ndarray) -> float:
    """max_x |I(x) - I(0)| / |I(0)|; 恒为零时返回 0"""
    values = np.asarray(values)
    reference = abs(values[0])
    deviation = float(np.max(np.abs(values - values[0])))
    if reference == 0:
        return 0.0 if deviation == 0 else np.inf
    return deviation / reference


def duality_window(system: HPEigenSystem, lam: complex) -> float:
    """积分窗口: 模态增长差不超过 e^7"""
    mu = np.linalg.eigvals(system.limit_matrix(lam))
    spread = float(np.ptp(mu.real))
    return system.x_max if spread <= 0 else min(system.x_max, 7.0 / spread)


def duality_invariant(system: HPEigenSystem, lam: complex, W0: np.ndarray, Xi0: np.ndarray,
                      step_factor: float = 0.5, duality: Optional[DualityMatrix] = None) -> Tuple[np.ndarray, np.ndarray]:
    """沿 [0, 窗口] 积分一对正向 / 伴随解, 返回 (节点, Xi^* S~ W)"""
    duality = duality or DualityMatrix(system)
    nodes = step_nodes(0.0, duality_window(system, lam), system.nodes, system.step_cap(lam, step_factor))
    forward = fundamental_flow(lambda x: system.matrix(x, lam), np.reshape(W0, (-1, 1)), nodes)
    adjoint = fundamental_flow(lambda x: duality.adjoint_matrix(x, lam), np.reshape(Xi0, (-1, 1)), nodes)
    values = np.array([(Xi.conj().T @ duality.matrix(x) @ W)[0, 0] for x, W, Xi in zip(nodes, forward, adjoint)])
    return nodes, values


def duality_invariant_check(system: HPEigenSystem, lam: complex, trials: int = 10, seed: int = 2024,
                            step_factor: float = 0.5, threads: int = 1) -> Dict[str, float]:
    """随机正向 / 伴随解对上 Xi^* S~ W 的最大相对漂移"""
    lam = complex(lam)
    duality = DualityMatrix(system)
    identity = max(duality.identity_error(x) for x in np.linspace(0.0, system.x_max, 17))
    if identity > 1e-10:
        raise ResolventError(f"S~ S~^{{-1}} 偏离单位阵 {identity:.3e}")

    rng = np.random.default_rng(seed)
    N = system.N
    pairs = [(rng.standard_normal(N) + 1j * rng.standard_normal(N),
              rng.standard_normal(N) + 1j * rng.standard_normal(N)) for _ in range(trials)]

    def drift(pair):
        _, values = duality_invariant(system, lam, pair[0], pair[1], step_factor, duality)
        return relative_drift(values)

    drifts = parallel_map(drift, pairs, threads=threads, desc=f"对偶检验 lam={lam:.3g}", disable=True)
    worst = float(max(drifts)) if drifts else 0.0
    logger.info(f"对偶不变量 lam={lam:.4g}: {trials} 次试验, 最大漂移 {worst:.3e}")
    return {"lam": lam, "trials": trials, "max_drift": worst, "identity_error": identity}


class ResolventBuilder:
    """在固定特征系统上组装预解核"""

    def __init__(self, system: HPEigenSystem, step_factor: float = 0.5, cond_max: float = 1e10,
                 gap_min: float = 1e-8):
        self.system = system
        self.step_factor = step_factor
        self.cond_max = cond_max
        self.gap_min = gap_min
        self.duality = DualityMatrix(system)
        self.V0 = boundary_kernel_basis(system.boundary_matrix)
        self.n, self.N, self.k = system.n, system.N, system.k
        self._E = np.vstack((np.eye(self.n), np.zeros((self.N - self.n, self.n))))

    def _coefficient(self, lam: complex):
        return lambda x: self.system.matrix(x, lam)

    def _reference(self, points: np.ndarray) -> np.ndarray:
        return np.concatenate((self.system.nodes, points))

    def bases(self, lam: complex, points: Sequence[float]) -> Tuple[Dict[float, np.ndarray], Dict[float, np.ndarray]]:
        """各点处衰减子空间与边界子空间的正交基"""
        system = self.system
        points = np.unique(np.asarray(points, dtype=float))
        if points.size == 0 or points[0] < 0:
            raise ResolventError("采样点必须非空且位于 [0, inf)")
        cap = system.step_cap(lam, self.step_factor)
        reference = self._reference(points)
        coefficient = self._coefficient(lam)

        frame, k = initial_frame(system.limit_matrix(lam), self.gap_min)
        if k != system.k:
            raise ResolventError(f"lam={lam:.6g} 处 dim S_+ = {k} != rank B = {system.k}")
        start = max(system.x_max, float(points[-1]))
        down = step_nodes(start, float(points[0]), reference, cap)
        decaying = orthogonal_frames(coefficient, frame, down)

        up = step_nodes(0.0, float(points[-1]), reference, cap)
        boundary = orthogonal_frames(coefficient, self.V0, up)

        plus = {float(x): Q for x, Q in zip(down, decaying)}
        zero = {float(x): Q for x, Q in zip(up, boundary)}
        return ({float(p): plus[float(p)] for p in points},
                {float(p): zero[float(p)] for p in points})

    def jump_data(self, lam: complex, y: float, plus: np.ndarray, zero: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
        """x = y 处两个分支的初值 (upper, lower) 与 cond(Phi(y))"""
        Phi = np.hstack((plus, zero))
        condition = float(np.linalg.cond(Phi))
        coords = linalg.solve(Phi, self.duality.inverse(y) @ self._E)
        upper = -plus @ coords[:self.k]
        lower = zero @ coords[self.k:]
        return upper, lower, condition

    def jump(self, lam: complex, y: float) -> np.ndarray:
        """G(y+0, y) - G(y-0, y)"""
        plus, zero = self.bases(complex(lam), [y])
        upper, lower, _ = self.jump_data(complex(lam), y, plus[float(y)], zero[float(y)])
        return self._E.T @ (upper - lower)

    def _propagate(self, lam: complex, state: np.ndarray, y: float, targets: np.ndarray,
                   keep: Dict[float, np.ndarray]) -> List[np.ndarray]:
        """把 y 处属于 keep 子空间的 N x n 初值搬到各目标点

        标架沿 keep 子空间自身稳定的方向 (从最远目标点指向 y) 传播并逐步 QR,
        P_i Q_i = Q_{i+1} R_{i+1}; 再从 y 往回用 R 做三角回代求坐标。
        解始终落在正交标架张成的子空间内, 大 |lambda| 下不会混入增长模态。
        """
        if targets.size == 0:
            return []
        cap = self.system.step_cap(lam, self.step_factor)
        coefficient = self._coefficient(lam)
        far = float(targets[np.argmax(np.abs(targets - y))])
        nodes = step_nodes(far, y, self._reference(targets), cap)

        Q = keep[far]
        frames, factors = [Q], []
        for x, x_next in zip(nodes[:-1], nodes[1:]):
            Q, R = linalg.qr(magnus4_propagator(coefficient, x, x_next - x) @ Q, mode='economic')
            if np.any(np.diag(R) == 0):
                raise ResolventError(f"lam={lam:.6g} 处子空间标架秩亏 (x={x_next:.4g})")
            frames.append(Q)
            factors.append(R)

        coords = [None] * len(nodes)
        coords[-1] = Q.conj().T @ state
        for i in range(len(factors) - 1, -1, -1):
            coords[i] = linalg.solve_triangular(factors[i], coords[i + 1])
        lookup = {float(x): i for i, x in enumerate(nodes)}
        return [self._E.T @ frames[lookup[float(x)]] @ coords[lookup[float(x)]] for x in targets]

    def kernel(self, lam: complex, x_nodes: Sequence[float], y_nodes: Sequence[float]) -> ResolventSample:
        lam = complex(lam)
        x_nodes = np.asarray(x_nodes, dtype=float)
        y_nodes = np.asarray(y_nodes, dtype=float)
        plus, zero = self.bases(lam, np.concatenate((x_nodes, y_nodes)))

        n = self.n
        kernel = np.zeros((x_nodes.size, y_nodes.size, n, n), dtype=complex)
        upper_branch = x_nodes[:, None] >= y_nodes[None, :]
        conditions = np.zeros(y_nodes.size)
        flagged = []

        for j, y in enumerate(y_nodes):
            upper, lower, conditions[j] = self.jump_data(lam, float(y), plus[float(y)], zero[float(y)])
            if conditions[j] > self.cond_max:
                flagged.append(j)
                logger.warning(f"lam={lam:.6g}, y={y:.4g}: cond(Phi(y)) = {conditions[j]:.3e}, 接近特征值")

            above = np.where(x_nodes >= y)[0]
            above = above[np.argsort(x_nodes[above])]
            below = np.where(x_nodes < y)[0]
            below = below[np.argsort(-x_nodes[below])]
            for index, value in zip(above, self._propagate(lam, upper, float(y), x_nodes[above], plus)):
                kernel[index, j] = value
            for index, value in zip(below, self._propagate(lam, lower, float(y), x_nodes[below], zero)):
                kernel[index, j] = value

        logger.debug(f"预解核 lam={lam:.4g}: {x_nodes.size}x{y_nodes.size} 个点, max cond {conditions.max():.3e}")
        return ResolventSample(lam=lam, x_nodes=x_nodes, y_nodes=y_nodes, kernel=kernel,
                               upper_branch=upper_branch, condition=conditions, flagged_y=flagged)

    def value(self, lam: complex, x: float, y: float) -> np.ndarray:
        return self.kernel(lam, [x], [y]).kernel[0, 0]


def resolvent_kernel(model: Model, profile, lam: complex, x_nodes: Sequence[float], y_nodes: Sequence[float],
                     x_max: Optional[float] = None, step_factor: float = 0.5, cond_max: float = 1e10,
                     system: Optional[HPEigenSystem] = None) -> ResolventSample:
    """G_lambda 在 x_nodes x y_nodes 上的采样"""
    try:
        system = system or HPEigenSystem(model, profile, x_max=x_max)
        return ResolventBuilder(system, step_factor, cond_max).kernel(lam, x_nodes, y_nodes)
    except BoundaryLayerError:
        raise
    except Exception as e:
        logger.error(f"预解核组装失败: {e}")
        raise ResolventError(f"预解核组装失败: {e}")


def transported_delta(field: ReducedField, lam: complex, x: float, y: float) -> np.ndarray:
    """H_lambda(x, y) = chi{A_*>0, x>y} A_*(x)^{-1} exp(int_y^x (-lam - eta_*)/A_*) R_*(x) L_*^T"""
    n = field.L_star.size
    if field.sign < 0 or x <= y:
        return np.zeros((n, n), dtype=complex)
    exponent = -lam * (field.tau(x) - field.tau(y)) - (field.damping(x) - field.damping(y))
    amplitude = np.exp(exponent) / field.A(x)
    return amplitude * np.outer(field.R(x), field.L_star)


def direct_resolvent_oracle(system: HPEigenSystem, lam: complex, y: float, x_eval: Sequence[float],
                            h_max: float = 0.01, max_length: float = 200.0) -> Tuple[np.ndarray, float]:
    """(lambda - L) G = delta_y 的 Keller 盒格式稀疏直接求解

    每个节点的未知量为 (U, Phi), Phi = A-bar U - B U'; y 取在某单元中点。
    返回 (G(x_eval, y), 网格步长)。
    """
    lam = complex(lam)
    x_eval = np.asarray(x_eval, dtype=float)
    if y <= 0:
        raise ResolventError(f"直接求解要求 y > 0: {y}")
    n, r = system.n, system.n - 1
    h0 = min(h_max, 0.05 / abs(lam)) if lam != 0 else h_max
    rate = float(np.min(np.abs(np.linalg.eigvals(system.limit_matrix(lam)).real)))
    length = max(float(x_eval.max()), y) + min(max_length, 30.0 / max(rate, 1e-12))

    m = max(int(round(y / h0 - 0.5)), 0)
    h = y / (m + 0.5)
    M = int(np.ceil(length / h))
    nodes = h * np.arange(M + 1)
    mids = nodes[:-1] + 0.5 * h
    A_nodes, _ = system.coefficients.tabulate(nodes, system.x_max)
    A_mids, B_mids = system.coefficients.tabulate(mids, system.x_max)
    _, B_nodes = system.coefficients.tabulate(nodes[:1], system.x_max)

    width = 2 * n
    size = width * (M + 1)
    rows, cols, vals = [], [], []
    row = 0

    def put(r_index, c_index, value):
        rows.append(r_index)
        cols.append(c_index)
        vals.append(value)

    for i in range(M):
        left, right = width * i, width * (i + 1)
        for a in range(n):
            put(row + a, right + n + a, 1.0)
            put(row + a, left + n + a, -1.0)
            put(row + a, left + a, 0.5 * h * lam)
            put(row + a, right + a, 0.5 * h * lam)
        row += n
        for a in range(1, n):
            put(row, left + n + a, 0.5)
            put(row, right + n + a, 0.5)
            for b in range(n):
                put(row, left + b, -0.5 * A_mids[i, a, b] - B_mids[i, a, b] / h)
                put(row, right + b, -0.5 * A_mids[i, a, b] + B_mids[i, a, b] / h)
            row += 1
    for i in range(M + 1):
        base = width * i
        put(row, base + n, 1.0)
        for b in range(n):
            put(row, base + b, -A_nodes[i, 0, b])
        row += 1

    last = width * M
    if system.boundary_case == "inflow":
        for a in range(n):
            put(row, a, 1.0)
            row += 1
    else:
        for a in range(1, n):
            for b in range(n):
                put(row, b, B_nodes[0, a, b])
            row += 1
        put(row, last, 1.0)
        row += 1
    for a in range(1, n):
        put(row, last + a, 1.0)
        row += 1

    if row != size:
        raise ResolventError(f"直接求解方程数 {row} != 未知量数 {size}")
    matrix = sparse.csc_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(size, size))
    rhs = np.zeros((size, n), dtype=complex)
    for j in range(n):
        rhs[(2 * n - 1) * m + j, j] = 1.0

    try:
        solution = splu(matrix).solve(rhs)
    except Exception as e:
        logger.error(f"稀疏直接求解失败: {e}")
        raise ResolventError(f"稀疏直接求解失败: {e}")

    U = solution.reshape(M + 1, width, n)[:, :n, :]
    values = np.zeros((x_eval.size, n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            values[:, a, b] = (np.interp(x_eval, nodes, U[:, a, b].real)
                               + 1j * np.interp(x_eval, nodes, U[:, a, b].imag))
    logger.debug(f"直接求解 lam={lam:.4g}, y={y:.4g}: h={h:.3e}, 长度 {length:.4g}, 未知量 {size}")
    return values, h


def oracle_agreement(builder: ResolventBuilder, lam: complex, x_nodes: Sequence[float], y_nodes: Sequence[float],
                     h_max: float = 0.01) -> Dict[str, float]:
    """ODE 组装的 G 与直接求解的相对上确界误差 (排除 |x - y| < 2h 的点)"""
    lam = complex(lam)
    x_nodes = np.asarray(x_nodes, dtype=float)
    sample = builder.kernel(lam, x_nodes, y_nodes)
    error, scale = 0.0, 0.0
    for j, y in enumerate(sample.y_nodes):
        direct, h = direct_resolvent_oracle(builder.system, lam, float(y), x_nodes, h_max)
        mask = np.abs(x_nodes - y) >= 2 * h
        if not np.any(mask):
            continue
        error = max(error, float(np.max(np.abs(sample.kernel[mask, j] - direct[mask]))))
        scale = max(scale, float(np.max(np.abs(direct[mask]))))
    relative = error / scale if scale > 0 else 0.0
    logger.info(f"直接求解对照 lam={lam:.4g}: 相对误差 {relative:.3e}")
    return {"lam": lam, "relative_error": relative, "scale": scale}


def scattering_consistency_check(builder: ResolventBuilder, lam: complex, x_nodes: Sequence[float],
                                 y_nodes: Sequence[float]) -> Dict[str, float]:
    """对偶解 Xi 给出的散射形式与投影构造的一致性

    在 y0 处取 Xi(y0)^* = Phi(y0)^{-1} S~(y0)^{-1}, 由对偶不变量 Xi(y)^* = Phi(y)^{-1} S~(y)^{-1}。
    """
    lam = complex(lam)
    system, duality = builder.system, builder.duality
    x_nodes = np.asarray(x_nodes, dtype=float)
    y_nodes = np.asarray(y_nodes, dtype=float)
    points = np.unique(np.concatenate((x_nodes, y_nodes)))
    plus, zero = builder.bases(lam, points)

    y0 = float(points[0])
    Phi0 = np.hstack((plus[y0], zero[y0]))
    Xi0 = linalg.solve(Phi0, duality.inverse(y0)).conj().T
    cap = system.step_cap(lam, builder.step_factor)
    nodes = step_nodes(y0, float(points[-1]), np.concatenate((system.nodes, points)), cap)
    Phis = fundamental_flow(lambda x: system.matrix(x, lam), Phi0, nodes)
    Xis = fundamental_flow(lambda x: duality.adjoint_matrix(x, lam), Xi0, nodes)
    lookup = {float(x): i for i, x in enumerate(nodes)}

    E, k = builder._E, builder.k
    sample = builder.kernel(lam, x_nodes, y_nodes)
    scattered = np.zeros_like(sample.kernel)
    for j, y in enumerate(y_nodes):
        dual = Xis[lookup[float(y)]].conj().T
        for i, x in enumerate(x_nodes):
            Phi = Phis[lookup[float(x)]]
            if x >= y:
                scattered[i, j] = -E.T @ Phi[:, :k] @ dual[:k] @ E
            else:
                scattered[i, j] = E.T @ Phi[:, k:] @ dual[k:] @ E
    scale = float(np.max(np.abs(sample.kernel)))
    deviation = float(np.max(np.abs(scattered - sample.kernel))) / max(scale, 1e-300)
    logger.info(f"散射形式一致性 lam={lam:.4g}: 相对偏差 {deviation:.3e}")
    return {"lam": lam, "relative_deviation": deviation}


def fit_kernel_envelope(sample: ResolventSample) -> Dict[str, float]:
    """拟合 |G(x, y)| <= C exp(eta |x - y|)"""
    keep = [j for j in range(sample.y_nodes.size) if j not in sample.flagged_y]
    distance = np.abs(sample.x_nodes[:, None] - sample.y_nodes[None, keep]).ravel()
    magnitude = np.max(np.abs(sample.kernel[:, keep]), axis=(2, 3)).ravel()
    mask = magnitude > 0
    if np.count_nonzero(mask) < 2 or np.ptp(distance[mask]) == 0:
        C = float(magnitude.max()) if magnitude.size else 0.0
        return {"C": C, "eta": 0.0, "samples": int(np.count_nonzero(mask))}
    eta, _ = np.polyfit(distance[mask], np.log(magnitude[mask]), 1)
    log_C = float(np.max(np.log(magnitude[mask]) - eta * distance[mask]))
    return {"C": float(np.exp(log_C)), "eta": float(eta), "samples": int(np.count_nonzero(mask))}


def low_frequency_modes(model: Model, lam_range: Tuple[float, float] = (1e-3, 1e-1),
                        samples: int = 12) -> LowFrequencyReport:
    """A_+(lam) 的慢模态与展开 -lam/a_j + lam^2 beta_j / a_j^3 的比较

    lam_range 以 min|a_j^+| 为单位: 实际扫描区间为 min|a_j^+| * lam_range,
    使慢特征速度较小的系统同样落在渐近区内。
    """
    endpoint = endpoint_characteristics(model)
    a, beta = endpoint.a_plus, endpoint.beta_plus
    n = model.n
    speed = float(np.min(np.abs(a)))
    lambdas = speed * np.geomspace(lam_range[0], lam_range[1], samples)

    residuals, slow_modes, fast_modes = [], [], []
    for lam in lambdas:
        mu = np.linalg.eigvals(endpoint_matrix(model, lam))
        order = np.argsort(np.abs(mu))
        slow, fast = mu[order[:n]], mu[order[n:]]
        if np.max(np.abs(slow)) >= 0.5 * np.min(np.abs(fast)):
            raise ResolventError(f"lam={lam:.3e} 处慢 / 快模态无法区分, 请缩小 lam 区间")
        predicted = -lam / a + lam ** 2 * beta / a ** 3
        rows, cols = linear_sum_assignment(np.abs(slow[:, None] - predicted[None, :]))
        matched = np.empty(n, dtype=complex)
        matched[cols] = slow[rows]
        residuals.append(float(np.max(np.abs(matched - predicted))))
        slow_modes.append(matched)
        fast_modes.append(np.sort_complex(fast))

    residuals = np.array(residuals)
    positive = residuals > 0
    order_fit = float(np.polyfit(np.log(lambdas[positive]), np.log(residuals[positive]), 1)[0]) \
        if np.count_nonzero(positive) >= 2 else np.inf

    M0 = endpoint_matrix(model, 0.0)
    mu0 = np.linalg.eigvals(M0)
    fast_min = float(np.sort(np.abs(mu0))[n])
    null = linalg.null_space(M0)
    E = np.vstack((np.eye(n), np.zeros((n - 1, n))))
    alignment = float(np.max(linalg.subspace_angles(null, E))) if null.shape[1] == n else np.pi / 2

    logger.info(f"低频展开 (lam in [{lambdas[0]:.3g}, {lambdas[-1]:.3g}]): 残差阶 {order_fit:.3f}, "
                f"快模态最小模 {fast_min:.4g}, 零空间偏差 {alignment:.2e}")
    return LowFrequencyReport(lambdas=lambdas, residuals=residuals, order=order_fit,
                              slow_modes=np.array(slow_modes), fast_modes=np.array(fast_modes),
                              fast_min_modulus=fast_min, kernel_alignment=alignment)


def high_frequency_structure(builder: ResolventBuilder, moduli: Sequence[float], y: float = 1.0,
                             separation: float = 0.5, field: Optional[ReducedField] = None,
                             threads: int = 1) -> HighFrequencyReport:
    """|lambda| 大时的双曲主部与抛物余项 (lambda = 1 + i omega)"""
    system = builder.system
    field = field or ReducedField(system.coefficients)
    n = system.n
    moduli = [float(m) for m in moduli]
    report = HighFrequencyReport(moduli=moduli)
    x = y + separation

    _, B = system.coefficients.tabulate(np.array([y]), system.x_max)
    b2 = viscous_blocks(B[0])[1]
    b_max = float(np.max(np.linalg.eigvals(b2).real))

    def sample(modulus: float):
        lam = complex(1.0, np.sqrt(max(modulus ** 2 - 1.0, 0.0)))
        offsets = np.array([1.0, 2.0, 3.0, 4.0]) / np.sqrt(modulus)
        result = builder.kernel(lam, np.concatenate(([y, x], y + offsets)), [y])
        return lam, offsets, result.kernel[:, 0]

    samples = parallel_map(sample, moduli, threads=threads, desc="高频采样")
    diagonal = []
    for modulus, (lam, offsets, G) in zip(moduli, samples):
        try:
            if system.boundary_case == "inflow":
                H = transported_delta(field, lam, x, y)
                error = np.linalg.norm(G[1][:, 0] - H[:, 0]) / np.linalg.norm(H[:, 0])
                report.hyperbolic_relative_error.append(float(error))
            else:
                travel = abs(float(field.tau(x) - field.tau(y)))
                damp = abs(float(field.damping(x) - field.damping(y)))
                reference = np.exp(-lam.real * travel - damp) / abs(float(field.A(x)))
                report.outflow_ratio.append(float(abs(G[1][0, 0]) / reference))
            if n > 1:
                diagonal.append(abs(G[0][1, 1]))
                tail = np.abs(G[2:, 1, 1])
                rate = -np.polyfit(offsets, np.log(tail), 1)[0]
                template = np.sqrt(modulus) * np.sqrt(np.exp(1j * np.angle(lam)) / b_max).real
                report.envelope_ratio.append(float(rate / template))
        except Exception as e:
            report.notes.append(f"|lam|={modulus:g} 拟合失败: {e}")
            logger.warning(report.notes[-1])

    if len(diagonal) == len(moduli) and len(moduli) >= 2:
        report.diagonal_exponent = float(np.polyfit(np.log(moduli), np.log(diagonal), 1)[0])
    report.raw.update({"y": y, "x": x, "b2_max": b_max, "diagonal": diagonal})
    logger.info(f"高频结构: 双曲误差 {report.hyperbolic_relative_error}, 流出比 {report.outflow_ratio}, "
                f"对角指数 {report.diagonal_exponent}")
    return report
