"""
半直线有限体积模拟

单元中心 (j + 1/2) h 上的守恒型格式: Fromm 斜率重构 + Roe 型迎风对流通量, 中心粘性通量,
SSP-RK2 时间推进。左端两层镜像虚单元 U_{-1} = 2 U_b - U_0, U_{-2} = 2 U_b - U_1; 右端零梯度。
"""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from core.boundary_forcing import BoundaryForcing
from core.coefficients import ProfileCoefficients
from core.hp_model import Model, endpoint_characteristics, viscous_blocks
from data.models import DecayFit, Profile, SimulationConfig, Snapshots
from utils.exceptions import SimulationBlowUpError, SimulationError
from utils.logger import get_logger

logger = get_logger(__name__)

CFL_LIMIT = 0.9
TRANSIENT_FRACTION = 0.1


def profile_state(profile: Profile, x: np.ndarray) -> np.ndarray:
    """剖面在任意点的值, x >= X_max 取 U_+"""
    x = np.asarray(x, dtype=float)
    spline = CubicSpline(profile.grid, profile.values, axis=0)
    values = spline(np.clip(x, 0.0, profile.x_max))
    values[x >= profile.x_max] = profile.u_plus
    return values


def roe_dissipation(A: np.ndarray) -> np.ndarray:
    """|A| = R |Lambda| R^{-1}; 特征值非实时退化为谱半径乘单位阵"""
    values, vectors = np.linalg.eig(A)
    if np.all(np.abs(values.imag) < 1e-12):
        inverse = np.linalg.inv(vectors)
        return np.real(np.einsum('...ij,...j,...jk->...ik', vectors, np.abs(values), inverse))
    radius = np.max(np.abs(values), axis=-1)
    return radius[..., None, None] * np.eye(A.shape[-1])


def gaussian_pulse(centers: np.ndarray, n: int, amplitude: float, center: float, width: float,
                   direction: Optional[np.ndarray] = None) -> np.ndarray:
    direction = np.ones(n) if direction is None else np.asarray(direction, dtype=float)
    return amplitude * np.exp(-((centers - center) / width) ** 2)[:, None] * direction[None, :]


class HalfLineSimulator:
    """线性化 (mode='linear') 或完全非线性 (mode='nonlinear') 的半直线演化"""

    def __init__(self, model: Model, profile: Profile, config: SimulationConfig, mode: str = "linear",
                 forcing: Optional[BoundaryForcing] = None,
                 coefficients: Optional[ProfileCoefficients] = None):
        if mode not in ("linear", "nonlinear"):
            raise SimulationError(f"未知演化模式: {mode}")
        self.model = model
        self.profile = profile
        self.config = config
        self.mode = mode
        self.case = model.boundary_case
        self.n = model.n
        self.forcing = forcing or BoundaryForcing(model.n)
        self.coefficients = coefficients or ProfileCoefficients(model, profile)

        self.h = float(config.h)
        speeds = np.abs(endpoint_characteristics(model).a_plus)
        self.a_max_plus = float(np.max(speeds))
        x_dom = config.x_dom or (1.2 * self.a_max_plus * config.t_final + config.center + 4 * config.width)
        self.M = int(np.ceil(x_dom / self.h))
        self.x_dom = self.M * self.h
        self.centers = (np.arange(self.M) + 0.5) * self.h
        self.faces = np.arange(self.M + 1) * self.h

        self.base = profile_state(profile, self.centers)
        self.base_boundary = np.asarray(profile.values[0], dtype=float)
        self.A_faces, self.B_faces = self.coefficients.tabulate(self.faces)
        self.absA_faces = roe_dissipation(self.A_faces)
        self.dt_max = self._stability_limit()
        self.dt = self._choose_dt()
        self.valid_until = min(config.t_final, self.x_dom / (1.2 * max(self.a_max_plus, 1e-12)))
        logger.debug(f"模拟器 {mode}: M={self.M}, h={self.h:g}, dt={self.dt:.3e}, 有效至 t={self.valid_until:.4g}")

    def _stability_limit(self) -> float:
        if self.mode == "linear":
            speed = float(np.max(np.abs(np.linalg.eigvals(self.A_faces))))
        else:
            states = np.vstack((self.base, self.base_boundary[None, :]))
            speed = float(np.max(np.abs(np.linalg.eigvals(self.model.flux_jacobian(states)))))
        b2 = self.B_faces[:, 1:, 1:]
        diffusion = float(np.max(np.linalg.eigvals(b2).real))
        limits = [self.h / max(speed, 1e-12)]
        if diffusion > 0:
            limits.append(self.h ** 2 / (2 * diffusion))
        return min(limits)

    def _choose_dt(self) -> float:
        if self.config.dt is not None:
            if self.config.dt > CFL_LIMIT * self.dt_max:
                raise SimulationError(f"dt={self.config.dt:.3e} 超过稳定上限 {CFL_LIMIT * self.dt_max:.3e}")
            return float(self.config.dt)
        return self.config.cfl * self.dt_max

    # ------------------------------------------------------------------
    # 边界
    # ------------------------------------------------------------------

    def boundary_state(self, U: np.ndarray, t: float) -> np.ndarray:
        """x = 0 处的边界状态 U_b"""
        if self.case == "inflow":
            data = self.forcing.value(t)
            return data if self.mode == "linear" else self.base_boundary + data
        u_b = 0.5 * (3 * U[0, 0] - U[1, 0])
        g = self.forcing.parabolic(t)
        if self.mode == "linear":
            b1, b2 = viscous_blocks(self.B_faces[0])
            v_b = np.linalg.solve(b2, g - b1[:, 0] * u_b)
        else:
            v_b = self.base_boundary[1:] + g
        return np.concatenate(([u_b], v_b))

    def _extend(self, U: np.ndarray, t: float) -> np.ndarray:
        U_b = self.boundary_state(U, t)
        left = np.array([2 * U_b - U[1], 2 * U_b - U[0]])
        right = np.array([U[-1], U[-1]])
        return np.vstack((left, U, right))

    # ------------------------------------------------------------------
    # 空间离散
    # ------------------------------------------------------------------

    def fluxes(self, U: np.ndarray, t: float) -> np.ndarray:
        """各面上的总通量 Phi = F - B U_x, 形状 (M+1, n)"""
        M = self.M
        ext = self._extend(U, t)
        slopes = 0.5 * (ext[2:] - ext[:-2])
        left_cells, right_cells = ext[1:M + 2], ext[2:M + 3]
        UL = left_cells + 0.5 * slopes[0:M + 1]
        UR = right_cells - 0.5 * slopes[1:M + 2]
        gradient = (right_cells - left_cells) / self.h

        if self.mode == "linear":
            A, absA = self.A_faces, self.absA_faces
            convective = 0.5 * np.einsum('fij,fj->fi', A, UL + UR)
            B = self.B_faces
        else:
            average = 0.5 * (left_cells + right_cells)
            absA = roe_dissipation(self.model.flux_jacobian(average))
            convective = 0.5 * (self.model.flux(UL) + self.model.flux(UR))
            B = self.model.viscosity(average)
        convective -= 0.5 * np.einsum('fij,fj->fi', absA, UR - UL)
        return convective - np.einsum('fij,fj->fi', B, gradient)

    def rhs(self, U: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        flux = self.fluxes(U, t)
        return -(flux[1:] - flux[:-1]) / self.h, flux[[0, -1]]

    def _check(self, U: np.ndarray, t: float):
        if self.mode == "nonlinear":
            bad = self.model.domain_violation(U)
        else:
            bad = ~np.all(np.isfinite(U), axis=-1)
        if np.any(bad):
            index = int(np.argmax(bad))
            raise SimulationBlowUpError(f"t={t:.6g} 处解失效 (x={self.centers[index]:.6g})",
                                        time=t, location=float(self.centers[index]))

    def step(self, U: np.ndarray, t: float, dt: float) -> Tuple[np.ndarray, np.ndarray]:
        """SSP-RK2 一步, 返回 (新解, 本步边界通量积分 (2, n))"""
        k1, f1 = self.rhs(U, t)
        U1 = U + dt * k1
        k2, f2 = self.rhs(U1, t + dt)
        U_new = 0.5 * U + 0.5 * (U1 + dt * k2)
        return U_new, 0.5 * dt * (f1 + f2)

    # ------------------------------------------------------------------
    # 推进
    # ------------------------------------------------------------------

    def initial_state(self, perturbation: Optional[np.ndarray]) -> np.ndarray:
        if perturbation is None:
            perturbation = np.zeros((self.M, self.n))
        perturbation = np.asarray(perturbation, dtype=float)
        if perturbation.shape != (self.M, self.n):
            raise SimulationError(f"初值形状 {perturbation.shape} != ({self.M}, {self.n})")
        return perturbation.copy() if self.mode == "linear" else self.base + perturbation

    def run(self, perturbation: Optional[np.ndarray] = None,
            times: Optional[Sequence[float]] = None) -> Snapshots:
        times = np.linspace(0.0, self.config.t_final, self.config.snapshots) if times is None \
            else np.asarray(sorted(times), dtype=float)
        U = self.initial_state(perturbation)
        self._check(U, 0.0)

        t = 0.0
        cumulative = np.zeros((2, self.n))
        values, fluxes = [], []
        for target in times:
            while t < target - 1e-12 * max(1.0, target):
                dt = min(self.dt, target - t)
                U, increment = self.step(U, t, dt)
                cumulative = cumulative + increment
                t += dt
                self._check(U, t)
            values.append(U.copy())
            fluxes.append(cumulative.copy())

        values = np.array(values)
        perturbation_values = values if self.mode == "linear" else values - self.base[None]
        if times[-1] > self.valid_until:
            logger.warning(f"模拟时间 {times[-1]:g} 超过截断区域有效时间 {self.valid_until:.4g}")
        return Snapshots(mode=self.mode, times=times, centers=self.centers, values=values,
                         perturbation=perturbation_values, h=self.h, dt=self.dt,
                         boundary_flux=np.array(fluxes), valid_until=self.valid_until)

    def operator_matrix(self) -> np.ndarray:
        """齐次边界条件下离散线性算子 L_h 的稠密矩阵"""
        if self.mode != "linear":
            raise SimulationError("只有线性模式有离散算子矩阵")
        saved, self.forcing = self.forcing, BoundaryForcing(self.n)
        try:
            size = self.M * self.n
            columns = []
            for index in range(size):
                unit = np.zeros(size)
                unit[index] = 1.0
                columns.append(self.rhs(unit.reshape(self.M, self.n), 0.0)[0].ravel())
            return np.array(columns).T
        finally:
            self.forcing = saved


def _default_perturbation(simulator: HalfLineSimulator, config: SimulationConfig) -> np.ndarray:
    return gaussian_pulse(simulator.centers, simulator.n, config.amplitude, config.center, config.width)


def evolve_linear(model: Model, profile: Profile, config: SimulationConfig,
                  perturbation: Optional[np.ndarray] = None, forcing: Optional[BoundaryForcing] = None,
                  times: Optional[Sequence[float]] = None) -> Snapshots:
    """U_t = -(A-bar U)_x + (B U_x)_x 的演化"""
    forcing = forcing or BoundaryForcing.from_config(model.n, config.forcing, model.boundary_case)
    simulator = HalfLineSimulator(model, profile, config, "linear", forcing)
    if perturbation is None:
        perturbation = _default_perturbation(simulator, config)
    return simulator.run(perturbation, times)


def evolve_nonlinear(model: Model, profile: Profile, config: SimulationConfig,
                     perturbation: Optional[np.ndarray] = None, forcing: Optional[BoundaryForcing] = None,
                     times: Optional[Sequence[float]] = None) -> Snapshots:
    """U_t + F(U)_x = (B(U) U_x)_x, 初值 U-bar + U_0, 边界值 U-bar(0) + h(t)"""
    forcing = forcing or BoundaryForcing.from_config(model.n, config.forcing, model.boundary_case)
    simulator = HalfLineSimulator(model, profile, config, "nonlinear", forcing)
    if perturbation is None:
        perturbation = _default_perturbation(simulator, config)
    return simulator.run(perturbation, times)


def lp_norm(values: np.ndarray, h: float, p: float) -> np.ndarray:
    """||U(., t)||_{L^p}, values 形状 (T, M, n)"""
    pointwise = np.linalg.norm(values, axis=-1)
    if np.isinf(p):
        return np.max(pointwise, axis=-1)
    return (h * np.sum(pointwise ** p, axis=-1)) ** (1.0 / p)


def fit_decay_rates(snapshots: Snapshots, p_list: Sequence[float] = (1.0, 2.0, np.inf)) -> List[DecayFit]:
    """log ||U||_p 对 log(1+t) 的最小二乘斜率"""
    times = snapshots.times
    start = TRANSIENT_FRACTION * times[-1]
    window = (times >= start) & (times <= snapshots.valid_until) & (times > 0)
    if np.count_nonzero(window) < 3:
        raise SimulationError(f"拟合窗口内快照不足: [{start:.4g}, {snapshots.valid_until:.4g}]")

    fits = []
    for p in p_list:
        p = float(p)
        norms = lp_norm(snapshots.perturbation, snapshots.h, p)[window]
        if np.any(norms <= 0):
            raise SimulationError(f"p={p} 时范数为零, 无法拟合衰减率")
        exponent, intercept = np.polyfit(np.log1p(times[window]), np.log(norms), 1)
        increase = float(np.max(norms[1:] / norms[:-1])) if norms.size > 1 else 1.0
        target = -0.5 * (1.0 - 1.0 / p) if np.isfinite(p) else -0.5
        fit = DecayFit(p=p, exponent=float(exponent), intercept=float(intercept), target=target,
                       window=[float(times[window][0]), float(times[window][-1])],
                       low_confidence=increase > 1.01)
        if fit.low_confidence:
            logger.warning(f"p={p}: 范数非单调 (最大增幅 {increase:.4f}), 拟合可信度低")
        logger.info(f"L^{p} 衰减指数 {exponent:.4f} (目标 {target:.4f})")
        fits.append(fit)
    return fits


def boundary_forcing_run(model: Model, profile: Profile, config: SimulationConfig,
                         forcing: Optional[BoundaryForcing] = None) -> Tuple[Snapshots, List[DecayFit], Dict[str, float]]:
    """零初值、衰减边界数据的线性演化及衰减率拟合"""
    forcing = forcing or BoundaryForcing.from_config(model.n, config.forcing, model.boundary_case)
    simulator = HalfLineSimulator(model, profile, config, "linear", forcing)
    snapshots = simulator.run(np.zeros((simulator.M, simulator.n)))
    violation = forcing.envelope_violation(snapshots.times) if forcing.kind != "none" else 0.0
    info = {"envelope_ratio": violation, "flagged": violation > 1.0 + 1e-12,
            "measure_initial": forcing.measure(0.0, model.boundary_case)}
    if info["flagged"]:
        logger.warning(f"边界扰动违反 |h| <= E_0 (1+t)^-1: 最大比值 {violation:.4g}")
    if forcing.is_zero:
        return snapshots, [], info
    return snapshots, fit_decay_rates(snapshots, config.p_list), info


def operator_spectrum_check(model: Model, profile: Profile, h: float = 0.5, length: float = 40.0,
                            threshold: float = 1e-3) -> Dict[str, object]:
    """网格 h 与 h/2 上离散算子 L_h 的最大实部特征值"""
    results = []
    for step in (h, h / 2):
        config = SimulationConfig(h=step, x_dom=length, t_final=1.0)
        simulator = HalfLineSimulator(model, profile, config, "linear")
        eigenvalues = np.linalg.eigvals(simulator.operator_matrix())
        results.append(float(np.max(eigenvalues.real)))
        logger.info(f"离散算子 h={step:g}: max Re lambda = {results[-1]:.4e}")
    return {"h": [h, h / 2], "max_real": results, "unstable": any(value >= threshold for value in results)}


def linearity_check(model: Model, profile: Profile, config: SimulationConfig, alpha: float = 3.0) -> Dict[str, float]:
    """evolve_linear(alpha U_0) = alpha evolve_linear(U_0)"""
    simulator = HalfLineSimulator(model, profile, config, "linear")
    U0 = _default_perturbation(simulator, config)
    single = simulator.run(U0).values
    scaled = simulator.run(alpha * U0).values
    scale = float(np.max(np.abs(alpha * single)))
    error = float(np.max(np.abs(scaled - alpha * single))) / max(scale, 1e-300)
    return {"alpha": alpha, "relative_error": error}


def stationarity_check(model: Model, profile: Profile, config: SimulationConfig) -> Dict[str, float]:
    """零扰动非线性演化相对 U-bar 的漂移速率"""
    simulator = HalfLineSimulator(model, profile, config, "nonlinear")
    snapshots = simulator.run(np.zeros((simulator.M, simulator.n)))
    drift = float(np.max(np.abs(snapshots.perturbation[-1])))
    rate = drift / snapshots.times[-1]
    logger.info(f"驻定性: t={snapshots.times[-1]:g} 时漂移 {drift:.3e}, 每单位时间 {rate:.3e}")
    return {"drift": drift, "drift_rate": rate}


def conservation_check(snapshots: Snapshots) -> Dict[str, float]:
    """单元和的变化只来自边界通量"""
    mass = snapshots.h * np.sum(snapshots.values, axis=1)
    change = mass - mass[0]
    predicted = snapshots.boundary_flux[:, 0] - snapshots.boundary_flux[:, 1]
    scale = max(float(np.max(np.abs(mass))), float(np.max(np.abs(snapshots.boundary_flux))), 1e-300)
    error = float(np.max(np.abs(change - predicted)))
    return {"error": error, "relative_error": error / scale}


def nonlinear_linear_agreement(model: Model, profile: Profile, config: SimulationConfig,
                               amplitudes: Sequence[float] = (1e-3, 5e-4)) -> Dict[str, object]:
    """||nonlinear - linear|| = O(eps^2) 的两幅度斜率

    非线性扰动先扣除零扰动演化 (离散格式对 U-bar 自身的漂移)。
    """
    quiet = config.model_copy(update={"forcing": None})
    simulator = HalfLineSimulator(model, profile, quiet, "nonlinear", BoundaryForcing(model.n))
    drift = simulator.run(np.zeros((simulator.M, simulator.n))).perturbation

    differences, relative = [], []
    for amplitude in amplitudes:
        scaled = quiet.model_copy(update={"amplitude": float(amplitude)})
        linear = evolve_linear(model, profile, scaled)
        nonlinear = evolve_nonlinear(model, profile, scaled)
        difference = float(np.max(np.abs(nonlinear.perturbation - drift - linear.perturbation)))
        differences.append(difference)
        relative.append(difference / max(float(np.max(np.abs(linear.perturbation))), 1e-300))
    slope = float(np.log(differences[0] / differences[1]) / np.log(amplitudes[0] / amplitudes[1]))
    logger.info(f"非线性 / 线性差异斜率 {slope:.3f}, 相对差异 {relative}")
    return {"amplitudes": list(amplitudes), "differences": differences,
            "relative_differences": relative, "slope": slope}


def grid_convergence(model: Model, profile: Profile, config: SimulationConfig, levels: int = 3) -> Dict[str, object]:
    """h, h/2, h/4 上光滑脉冲的 Richardson 收敛阶"""
    solutions = []
    x_dom = config.x_dom
    for level in range(levels):
        update = {"h": config.h / 2 ** level, "snapshots": 2, "forcing": None}
        if x_dom is not None:
            update["x_dom"] = x_dom
        refined = config.model_copy(update=update)
        simulator = HalfLineSimulator(model, profile, refined, "linear")
        if level == 0:
            # 细网格单元必须恰好二分粗网格单元
            x_dom = simulator.x_dom * (1 - 1e-12)
        U0 = _default_perturbation(simulator, refined)
        final = simulator.run(U0).values[-1]
        for _ in range(level):
            final = 0.5 * (final[0::2] + final[1::2])
        solutions.append(final)
    size = min(len(s) for s in solutions)
    errors = [float(np.max(np.abs(solutions[i][:size] - solutions[i + 1][:size]))) for i in range(levels - 1)]
    orders = [float(np.log2(errors[i] / errors[i + 1])) for i in range(len(errors) - 1)]
    logger.info(f"网格收敛阶 {orders}")
    return {"errors": errors, "orders": orders}
