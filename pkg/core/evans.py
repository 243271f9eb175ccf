"""
Evans 函数与围道绕数判定

D(lam) = det(W_1^+, ..., W_k^+, V0)|_{x=0}, 衰减解由 X_max 处的稳定标架反向积分,
增长因子 exp(tr_+ X_max) 并入对数尺度。
"""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.eigen_system import EigenSystem, HPEigenSystem, boundary_kernel_basis
from core.hp_model import Model
from core.magnus import orthogonal_flow, step_nodes
from core.subspace import initial_frame, stable_basis_at_infinity, transport_frame
from data.models import ContourResult, EvansConfig, EvansSample, Profile
from utils.exceptions import EvansError
from utils.logger import get_logger
from utils.parallel import parallel_map

logger = get_logger(__name__)

INDENT_POINTS = 8


def essential_spectrum_curves(model: Model, xi_grid: Sequence[float]) -> np.ndarray:
    """端点符号 -xi^2 B_+ - i xi A_+ 的特征值, 形状 (len(xi), n), 每行按实部降序"""
    A_plus = model.flux_jacobian(model.u_plus)
    B_plus = model.viscosity(model.u_plus)
    curves = []
    for xi in np.asarray(xi_grid, dtype=float):
        values = np.linalg.eigvals(-xi ** 2 * B_plus - 1j * xi * A_plus)
        curves.append(values[np.argsort(-values.real)])
    return np.array(curves)


def essential_spectrum_margin(model: Model, xi_max: float = 50.0, count: int = 2001) -> float:
    """xi != 0 上曲线的最大实部 (应为负)"""
    xi = np.linspace(-xi_max, xi_max, count)
    xi = xi[np.abs(xi) > 1e-3]
    return float(np.max(essential_spectrum_curves(model, xi).real))


def stable_trace(system: EigenSystem, lam: complex) -> complex:
    """A_+(lam) 稳定特征值之和"""
    mu = np.linalg.eigvals(system.limit_matrix(lam))
    stable = mu[mu.real < 0]
    if stable.size != system.k:
        raise EvansError(f"lam={lam:.6g} 处 dim S_+ = {stable.size} != rank B = {system.k}")
    return complex(np.sum(stable))


def evans_at(system: EigenSystem, frame: np.ndarray, lam: complex, step_factor: float = 0.5,
             V0: Optional[np.ndarray] = None, nodes: Optional[np.ndarray] = None) -> EvansSample:
    """单点 Evans 函数"""
    lam = complex(lam)
    trace_plus = stable_trace(system, lam)
    if nodes is None:
        nodes = step_nodes(system.x_max, 0.0, system.nodes, system.step_cap(lam, step_factor))
    if V0 is None:
        V0 = boundary_kernel_basis(system.boundary_matrix)

    Q, log_det, steps = orthogonal_flow(lambda x: system.matrix(x, lam), frame, nodes)
    total = log_det + trace_plus * system.x_max
    value = np.linalg.det(np.hstack((Q, V0))) * np.exp(total)
    if not np.isfinite(value):
        raise EvansError(f"lam={lam:.6g} 处 Evans 函数溢出 (log scale {total.real:.4g})")

    logger.debug(f"D({lam:.6g}) = {value:.6e}, 步数 {steps}")
    return EvansSample(lam=lam, value=complex(value), log_scale=float(total.real), steps=steps)


def winding_number_of_path(x: np.ndarray, y: np.ndarray) -> int:
    """闭合路径 (x, y) 绕原点的绕数: 统计逆时针穿越正实轴射线的次数"""
    if x[-1] != x[0] or y[-1] != y[0]:
        raise EvansError("射线穿越法需要闭合路径")
    winding = 0
    cur_sign = y[0] >= 0
    for i in range(1, len(x)):
        if (y[i] >= 0) != cur_sign:
            cur_sign = y[i] >= 0
            if x[i] > 0 and x[i - 1] > 0:
                winding += 2 * cur_sign - 1
            elif not (x[i] <= 0 and x[i - 1] <= 0):
                cross = (x[i - 1] * y[i] - x[i] * y[i - 1]) / (y[i] - y[i - 1])
                if cross > 0:
                    winding += 2 * cur_sign - 1
    return winding


def argument_increments(values: np.ndarray) -> np.ndarray:
    return np.angle(values[1:] / values[:-1])


def close_by_conjugation(upper: np.ndarray) -> np.ndarray:
    """上半路径 R -> iR -> i eps -> eps 加上共轭的下半路径, 闭合为逆时针围道"""
    return np.concatenate((upper, np.conj(upper[::-1])[1:]))


def upper_contour(radius: float, epsilon: float, n_min: int) -> np.ndarray:
    """上半围道: 外弧, 虚轴 (几何分布), 原点凹陷"""
    if radius <= 0 or epsilon <= 0 or epsilon >= radius:
        raise EvansError(f"空围道: R={radius}, eps={epsilon}")
    half = max(n_min // 2, 4)
    arc = radius * np.exp(1j * np.linspace(0.0, np.pi / 2, half))
    axis = 1j * np.geomspace(radius, epsilon, half)[1:]
    indent = epsilon * np.exp(1j * np.linspace(np.pi / 2, 0.0, INDENT_POINTS))[1:]
    upper = np.concatenate((arc, axis, indent))
    upper[0] = radius
    upper[-1] = epsilon
    return upper


def contour_midpoint(a: complex, b: complex) -> complex:
    """同一弧上取极角中点, 虚轴上取几何中点, 否则取算术中点"""
    ra, rb = abs(a), abs(b)
    if abs(ra - rb) <= 1e-12 * max(ra, rb):
        return ra * np.exp(0.5j * (np.angle(a) + np.angle(b)))
    if abs(a.real) <= 1e-14 * ra and abs(b.real) <= 1e-14 * rb and a.imag * b.imag > 0:
        return 1j * np.sign(a.imag) * np.sqrt(a.imag * b.imag)
    return 0.5 * (a + b)


class EvansContourSolver:
    """围道采样, 自适应加密与绕数判定"""

    def __init__(self, system: EigenSystem, config: Optional[EvansConfig] = None, threads: int = 1):
        self.system = system
        self.config = config or EvansConfig()
        self.threads = threads
        self.V0 = boundary_kernel_basis(system.boundary_matrix)
        self.notes: List[str] = []

    def sampler(self, lam: complex) -> np.ndarray:
        return self.system.limit_matrix(lam)

    def evaluate(self, lambdas: Sequence[complex], frames: Sequence[np.ndarray],
                 desc: str = "Evans 采样") -> List[EvansSample]:
        step_factor = self.config.step_factor

        def task(item):
            lam, frame = item
            return evans_at(self.system, frame, lam, step_factor, self.V0)

        return parallel_map(task, list(zip(lambdas, frames)), self.threads, desc=desc)

    def _path(self, lambdas: np.ndarray, epsilon: float):
        return stable_basis_at_infinity(self.sampler, lambdas, k=self.system.k,
                                        gap_min=self.config.gap_min, kato_rel=self.config.kato_rel,
                                        scale_floor=epsilon)

    def _transport(self, frame: np.ndarray, lam_from: complex, lam_to: complex, epsilon: float) -> np.ndarray:
        V, _ = transport_frame(self.sampler, frame, lam_from, lam_to, self.system.k,
                               self.config.kato_rel, self.config.gap_min, epsilon)
        return V

    def choose_radius(self) -> Tuple[float, List[float]]:
        """外半径: 弧上 |D| 远离判零阈值且弧上辐角变化 < pi/4"""
        cfg = self.config
        if cfg.radius is not None:
            return float(cfg.radius), [float(cfg.radius)]

        R = cfg.radius_initial
        history = []
        while True:
            history.append(R)
            arc = R * np.exp(1j * np.linspace(0.0, np.pi / 2, max(cfg.n_min // 2, 4)))
            arc[0] = R
            path = self._path(arc, cfg.epsilon_factor * R)
            values = np.array([s.value for s in self.evaluate(arc, path.frames, desc=f"半径搜索 R={R:g}")])
            floor = cfg.abs_floor_rel * float(np.median(np.abs(values)))
            swing = abs(float(np.sum(argument_increments(values))))
            logger.info(f"半径 R={R:g}: min|D|={np.min(np.abs(values)):.3e}, 弧上辐角变化 {swing:.3f}")
            if np.min(np.abs(values)) > 10 * floor and swing < np.pi / 4:
                return R, history
            if 2 * R > cfg.radius_max:
                self.notes.append(f"半径搜索达到上限 R={R:g}, 弧上辐角变化 {swing:.3f}")
                logger.warning(self.notes[-1])
                return R, history
            R *= 2

    def _refine(self, lambdas: List[complex], frames: List[np.ndarray], values: List[complex],
                epsilon: float, floor: float) -> int:
        cfg = self.config
        rounds = 0
        while rounds < cfg.max_refinements:
            current = np.array(values)
            steps = np.abs(argument_increments(current))
            targets = set(np.where(steps >= np.pi / 2)[0].tolist())
            for i in np.where(np.abs(current) < floor)[0]:
                if i > 0:
                    targets.add(i - 1)
                if i < len(current) - 1:
                    targets.add(i)
            if not targets:
                break
            rounds += 1
            ordered = sorted(targets)
            new_lams = [contour_midpoint(lambdas[i], lambdas[i + 1]) for i in ordered]
            new_frames = [self._transport(frames[i], lambdas[i], lam, epsilon) for i, lam in zip(ordered, new_lams)]
            samples = self.evaluate(new_lams, new_frames, desc=f"加密第 {rounds} 轮")
            for i, lam, frame, sample in sorted(zip(ordered, new_lams, new_frames, samples),
                                                key=lambda item: item[0], reverse=True):
                lambdas.insert(i + 1, lam)
                frames.insert(i + 1, frame)
                values.insert(i + 1, sample.value)
            logger.warning(f"围道加密第 {rounds} 轮: 新增 {len(new_lams)} 个采样")
        return rounds

    def _winding(self, values: np.ndarray) -> Tuple[float, int, np.ndarray]:
        closed = close_by_conjugation(values)
        raw = float(np.sum(argument_increments(closed)) / (2 * np.pi))
        ring = np.append(closed, closed[0])
        crossing = winding_number_of_path(ring.real.copy(), ring.imag.copy())
        return raw, crossing, closed

    def solve(self, check_refinement: bool = True) -> ContourResult:
        cfg = self.config
        R, history = self.choose_radius()
        epsilon = cfg.epsilon_factor * R
        logger.info(f"Evans 围道: R={R:g}, eps={epsilon:.3e}, 系统 {self.system.name}")

        upper = upper_contour(R, epsilon, cfg.n_min)
        path = self._path(upper, epsilon)
        lambdas = list(upper)
        frames = list(path.frames)
        values = [s.value for s in self.evaluate(lambdas, frames)]

        floor = cfg.abs_floor_rel * float(np.median(np.abs(values)))
        rounds = self._refine(lambdas, frames, values, epsilon, floor)

        values_arr = np.array(values)
        raw, crossing, closed = self._winding(values_arr)
        winding = int(round(raw))
        full_lambdas = close_by_conjugation(np.array(lambdas))
        steps = np.abs(argument_increments(closed))
        min_abs = float(np.min(np.abs(closed)))

        inconclusive = []
        if min_abs < floor:
            inconclusive.append(f"min|D|={min_abs:.3e} 低于判零阈值 {floor:.3e}, 围道上可能有零点")
        if np.max(steps) >= np.pi / 2:
            inconclusive.append(f"加密 {rounds} 轮后相邻辐角增量仍达 {np.max(steps):.3f}")
        if abs(raw - winding) > 0.1:
            inconclusive.append(f"辐角累加 {raw:.4f} 不接近整数")
        if crossing != winding:
            inconclusive.append(f"射线穿越绕数 {crossing} 与辐角绕数 {winding} 不一致")

        if check_refinement and not inconclusive:
            doubled = self._doubled_winding(lambdas, frames, values_arr, epsilon)
            if doubled != winding:
                inconclusive.append(f"加密一倍后绕数 {doubled} != {winding}")
            else:
                self.notes.append("绕数在采样加倍后保持不变")

        if isinstance(self.system, HPEigenSystem):
            margin = essential_spectrum_margin(self.system.model)
            if margin >= 0:
                self.notes.append(f"本质谱曲线进入右半平面: max Re = {margin:.3e}")

        if inconclusive:
            verdict = "inconclusive"
            self.notes.extend(inconclusive)
            for note in inconclusive:
                logger.warning(note)
        elif winding == 0:
            verdict = "stable"
        elif winding > 0:
            verdict = "unstable"
        else:
            verdict = "inconclusive"
            self.notes.append(f"负绕数 {winding}")

        logger.info(f"绕数 {winding} (射线法 {crossing}), 判定: {verdict}")
        return ContourResult(radius=R, epsilon=epsilon, lambdas=full_lambdas, values=closed,
                             log_scales=np.array([np.log(abs(v)) if v != 0 else -np.inf for v in closed]),
                             winding_number=winding, winding_by_crossing=crossing, verdict=verdict,
                             min_abs=min_abs, abs_floor=floor, max_arg_step=float(np.max(steps)),
                             refinements=rounds, radius_history=history,
                             near_origin=complex(values_arr[-1]), notes=list(self.notes))

    def _doubled_winding(self, lambdas, frames, values, epsilon) -> int:
        mids = [contour_midpoint(a, b) for a, b in zip(lambdas[:-1], lambdas[1:])]
        mid_frames = [self._transport(f, a, m, epsilon) for f, a, m in zip(frames[:-1], lambdas[:-1], mids)]
        mid_values = [s.value for s in self.evaluate(mids, mid_frames, desc="加倍采样")]
        merged = np.empty(len(values) + len(mid_values), dtype=complex)
        merged[0::2] = values
        merged[1::2] = mid_values
        raw, _, _ = self._winding(merged)
        return int(round(raw))


def evans_contour(model: Model, profile: Profile, config: Optional[EvansConfig] = None,
                  threads: int = 1, system: Optional[EigenSystem] = None) -> ContourResult:
    """在 {Re lam >= 0, eps <= |lam| <= R} 的边界上判定条件 (D)"""
    config = config or EvansConfig()
    if system is None:
        system = HPEigenSystem(model, profile, x_max=config.x_max)
    return EvansContourSolver(system, config, threads).solve()


def _frames_along(system: EigenSystem, lambdas: Sequence[complex], config: EvansConfig) -> np.ndarray:
    """从实轴上 |lam| 最大处出发输运到各采样点"""
    lambdas = np.asarray(lambdas, dtype=complex)
    start = complex(max(np.max(np.abs(lambdas)), 1.0))
    path = stable_basis_at_infinity(system.limit_matrix, np.concatenate(([start], lambdas)), k=system.k,
                                    gap_min=config.gap_min, kato_rel=config.kato_rel,
                                    scale_floor=float(np.min(np.abs(lambdas))))
    return path.frames[1:]


def x_max_independence_check(model: Model, profile: Profile, lambdas: Sequence[complex],
                             factor: float = 1.25, config: Optional[EvansConfig] = None,
                             tolerance: float = 1e-6) -> Dict:
    """D 在截断长度 X 与 factor * X 下的相对差"""
    config = config or EvansConfig()
    X = config.x_max or profile.x_max
    short = HPEigenSystem(model, profile, x_max=X)
    long = HPEigenSystem(model, profile, coefficients=short.coefficients, x_max=factor * X)
    frames = _frames_along(short, lambdas, config)
    V0 = boundary_kernel_basis(short.boundary_matrix)
    differences = []
    for lam, frame in zip(lambdas, frames):
        d1 = evans_at(short, frame, lam, config.step_factor, V0).value
        d2 = evans_at(long, frame, lam, config.step_factor, V0).value
        differences.append(abs(d1 - d2) / max(abs(d1), 1e-300))
    worst = float(max(differences)) if differences else 0.0
    logger.info(f"X_max 无关性: 最大相对差 {worst:.3e}")
    return {"x_max": X, "factor": factor, "lambdas": list(lambdas), "relative_differences": differences,
            "max_relative_difference": worst, "passed": worst <= tolerance}


def conjugation_check(system: EigenSystem, lambdas: Sequence[complex],
                      config: Optional[EvansConfig] = None, tolerance: float = 1e-8) -> Dict:
    """沿共轭路径独立输运, 检验 D(conj lam) = conj D(lam)"""
    config = config or EvansConfig()
    lambdas = np.asarray(lambdas, dtype=complex)
    upper = _frames_along(system, lambdas, config)
    lower = _frames_along(system, np.conj(lambdas), config)
    V0 = boundary_kernel_basis(system.boundary_matrix)
    deviations = []
    for lam, f_up, f_low in zip(lambdas, upper, lower):
        d_up = evans_at(system, f_up, lam, config.step_factor, V0).value
        d_low = evans_at(system, f_low, np.conj(lam), config.step_factor, V0).value
        deviations.append(abs(d_low - np.conj(d_up)) / max(abs(d_up), 1e-300))
    worst = float(max(deviations)) if deviations else 0.0
    return {"lambdas": lambdas.tolist(), "deviations": deviations, "max_deviation": worst,
            "passed": worst <= tolerance}


def analyticity_check(system: EigenSystem, center: complex, radius: float, points: int = 16,
                      config: Optional[EvansConfig] = None, tolerance: float = 1e-6) -> Dict:
    """小圆周上 (1/2 pi i) oint D'/D dlam 应为整数; D' 由四点中心差分 (步长 1e-4 |lam|)"""
    config = config or EvansConfig()
    if radius <= 0:
        raise EvansError("子围道半径必须为正")
    phases = 2 * np.pi * np.arange(points) / points
    circle = center + radius * np.exp(1j * phases)
    frames = _frames_along(system, circle, config)
    V0 = boundary_kernel_basis(system.boundary_matrix)
    reach = abs(center) + radius
    nodes = step_nodes(system.x_max, 0.0, system.nodes, system.step_cap(reach * 1.01, config.step_factor))

    def evans(lam, frame):
        return evans_at(system, frame, lam, config.step_factor, V0, nodes=nodes).value

    total = 0j
    for lam, frame, phase in zip(circle, frames, phases):
        delta = 1e-4 * abs(lam)
        stencil = {}
        for m in (-2, -1, 1, 2):
            target = lam + m * delta
            moved = kato_local(system, frame, lam, target, config)
            stencil[m] = evans(target, moved)
        derivative = (stencil[-2] - 8 * stencil[-1] + 8 * stencil[1] - stencil[2]) / (12 * delta)
        total += derivative / evans(lam, frame) * 1j * radius * np.exp(1j * phase)
    value = total * (2 * np.pi / points) / (2j * np.pi)
    nearest = int(round(value.real))
    deviation = float(abs(value - nearest))
    logger.info(f"解析性检查: 围道积分 {value:.8f}, 偏离整数 {deviation:.2e}")
    return {"center": center, "radius": radius, "value": value, "nearest_integer": nearest,
            "deviation": deviation, "passed": deviation <= tolerance}


def kato_local(system: EigenSystem, frame: np.ndarray, lam_from: complex, lam_to: complex,
               config: EvansConfig) -> np.ndarray:
    V, _ = transport_frame(system.limit_matrix, frame, lam_from, lam_to, system.k,
                           config.kato_rel, config.gap_min)
    return V


def frame_at(system: EigenSystem, lam: complex, config: Optional[EvansConfig] = None) -> np.ndarray:
    """单点标架 (实 lam 时取实 Schur 基)"""
    config = config or EvansConfig()
    frame, k = initial_frame(system.limit_matrix(lam), config.gap_min)
    if k != system.k:
        raise EvansError(f"lam={lam} 处 dim S_+ = {k} != {system.k}")
    return frame
