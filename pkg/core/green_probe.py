"""
特征线与 Green 函数探针

窄高斯初值 (宽度 w = width_factor * h, e_1 方向单位质量) 放在 y 处做线性演化,
测量沿特征线 dz/dt = A_*(z) 输运的尖峰质量, 去除尖峰后的残差与模板包络比较。
"""

from typing import Dict, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from core.coefficients import ProfileCoefficients, ReducedField
from core.halfline_sim import HalfLineSimulator
from core.hp_model import Model, endpoint_characteristics
from core.templates import fit_template_constant, green_envelope
from data.models import CharacteristicPath, Profile, ProbeConfig, ProbeReport, SimulationConfig
from utils.exceptions import SimulationError
from utils.logger import get_logger

logger = get_logger(__name__)

MASS_HALF_WIDTH = 3.5
BASELINE_HALF_WIDTH = 6.0


def _speed_bound(field: ReducedField) -> float:
    return float(np.max(np.abs(field.A(np.linspace(0.0, field.x_max, 257)))))


def characteristic_path(field: ReducedField, x: float, t: float, samples: int = 101) -> CharacteristicPath:
    """反向特征线 z_*(s), z_*(t) = x; 由 solve_ivp 与 tau 反函数两种方式求 z_*(0)"""
    if t <= 0:
        raise SimulationError(f"特征线要求 t > 0: {t}")

    def boundary(s, z):
        return z[0]
    boundary.terminal = True
    boundary.direction = -1

    solution = solve_ivp(lambda s, z: np.atleast_1d(field.A(z[0])), (t, 0.0), [x], method="DOP853",
                         rtol=1e-12, atol=1e-12, dense_output=True, events=boundary)
    if not solution.success:
        raise SimulationError(f"特征线积分失败: {solution.message}")

    crossing = float(solution.t_events[0][0]) if solution.t_events[0].size else None
    s_end = crossing if crossing is not None else 0.0
    times = np.linspace(t, s_end, samples)
    positions = solution.sol(times)[0]
    z0 = float(positions[-1])
    a_bar = (x - z0) / (t - s_end) if t > s_end else float(field.A(x))

    target = float(field.tau(x)) - t
    quadrature = None
    if field.sign > 0 and target >= 0:
        quadrature = float(brentq(lambda z: float(field.tau(z)) - target, 0.0, x, xtol=1e-14, rtol=1e-14))
    elif field.sign < 0:
        upper = x + t * _speed_bound(field) + 1.0
        quadrature = float(brentq(lambda z: float(field.tau(z)) - target, x, upper, xtol=1e-14, rtol=1e-14))
    return CharacteristicPath(x=x, t=t, times=times, positions=positions, a_bar=float(a_bar), z0=z0,
                              z0_quadrature=quadrature, boundary_crossing_time=crossing)


def characteristic_from(field: ReducedField, y: float, t: float) -> Optional[float]:
    """由 y 出发的正向特征线在时刻 t 的位置; 提前到达边界时返回 None"""
    target = float(field.tau(y)) + t
    if field.sign > 0:
        upper = y + t * _speed_bound(field) + 1.0
        return float(brentq(lambda z: float(field.tau(z)) - target, y, upper, xtol=1e-14, rtol=1e-14))
    if target > 0:
        return None
    return float(brentq(lambda z: float(field.tau(z)) - target, 0.0, y, xtol=1e-14, rtol=1e-14))


def measure_spike(centers: np.ndarray, u: np.ndarray, predicted: float, width: float) -> Dict[str, object]:
    """在预测位置附近定位尖峰, 减去二次基线后积分质量"""
    h = float(centers[1] - centers[0])
    search = np.abs(centers - predicted) <= 10 * width
    if not np.any(search):
        raise SimulationError(f"预测位置 {predicted:.4g} 不在计算区域内")
    peak = float(centers[search][np.argmax(np.abs(u[search]))])
    offset = centers - peak
    inner = np.abs(offset) <= MASS_HALF_WIDTH * width
    outer = (np.abs(offset) > MASS_HALF_WIDTH * width) & (np.abs(offset) <= BASELINE_HALF_WIDTH * width)
    if np.count_nonzero(outer) < 3:
        raise SimulationError(f"尖峰两侧基线点不足, 需要 h <= {width / 2:.3e}")
    baseline = np.polyval(np.polyfit(offset[outer], u[outer], 2), offset)
    spike = np.where(inner, u - baseline, 0.0)
    mass = float(h * np.sum(spike))
    position = float(np.sum(centers * spike) / np.sum(spike)) if mass != 0 else peak
    return {"position": position, "mass": mass, "spike": spike}


def green_probe(model: Model, profile: Profile, y: float, times: Sequence[float],
                config: Optional[ProbeConfig] = None, simulation: Optional[SimulationConfig] = None,
                field: Optional[ReducedField] = None, keep_residuals: bool = False):
    """Green 函数探针; keep_residuals=True 时同时返回各时刻去除尖峰后的残差场"""
    config = config or ProbeConfig()
    simulation = simulation or SimulationConfig()
    coefficients = ProfileCoefficients(model, profile)
    field = field or ReducedField(coefficients)
    endpoint = endpoint_characteristics(model)

    h = config.h
    width = config.width_factor * h
    if width < 2 * h:
        raise SimulationError(f"探针宽度 w={width:.3e} 不足 2h, 需要 h <= {width / 2:.3e}")
    times = np.asarray(sorted(times), dtype=float)

    predicted = []
    for t in times:
        position = characteristic_from(field, y, float(t))
        if position is None:
            raise SimulationError(f"y={y:g} 处出发的特征线在 t={t:g} 前到达边界")
        predicted.append(position)
    predicted = np.array(predicted)

    speed = float(np.max(np.abs(endpoint.a_plus)))
    x_dom = max(y, float(predicted.max())) + 1.2 * speed * times[-1] + 8.0
    run_config = simulation.model_copy(update={"h": h, "x_dom": x_dom, "t_final": float(times[-1]),
                                               "dt": None, "forcing": None})
    simulator = HalfLineSimulator(model, profile, run_config, "linear", coefficients=coefficients)
    initial = np.zeros((simulator.M, simulator.n))
    initial[:, 0] = np.exp(-0.5 * ((simulator.centers - y) / width) ** 2) / (np.sqrt(2 * np.pi) * width)
    snapshots = simulator.run(initial, times)

    centers = simulator.centers
    positions, masses, sups, residuals = [], [], [], []
    for k, t in enumerate(times):
        values = snapshots.values[k]
        measured = measure_spike(centers, values[:, 0], predicted[k], width)
        R = np.array([field.R(x) for x in centers])
        residual = values - measured["spike"][:, None] * R
        positions.append(measured["position"])
        masses.append(measured["mass"])
        sups.append(float(np.max(np.abs(residual))))
        residuals.append(residual)

    expected = np.array([float(field.attenuation(y, x)) for x in predicted])
    density = np.array([float(field.density_factor(y, x)) for x in predicted])

    magnitude = np.concatenate([np.linalg.norm(r, axis=-1) for r in residuals])
    xs = np.tile(centers, times.size)
    ts = np.repeat(times, centers.size)
    fit = fit_template_constant(magnitude, xs, ts, y, endpoint)
    ratios = []
    for k, t in enumerate(times):
        envelope = green_envelope(endpoint, fit["M"], centers, t, y)
        ratios.append(float(np.max(np.linalg.norm(residuals[k], axis=-1) / np.maximum(envelope, 1e-300))))

    notes = [f"w = {width:.3e}, h = {h:.3e}"]
    errors = np.abs(np.array(positions) - predicted)
    if np.any(errors > 2 * h):
        notes.append(f"尖峰位置误差 {errors.max():.3e} 超过 2h")
        logger.warning(notes[-1])
    report = ProbeReport(y=y, width=width, times=times, predicted_positions=predicted,
                         measured_positions=np.array(positions), measured_mass=np.array(masses),
                         predicted_mass=expected, density_factor=density, residual_sup=np.array(sups),
                         template_ratio=np.array(ratios), M=fit["M"], notes=notes)
    logger.info(f"探针 y={y:g}: 质量比 {np.round(np.array(masses) / expected, 4).tolist()}, M={fit['M']:.3g}")
    if keep_residuals:
        return report, {"centers": centers, "residuals": np.array(residuals)}
    return report


def probe_smooth_part(model: Model, profile: Profile, x: float, t: float, y: float,
                      config: Optional[ProbeConfig] = None,
                      simulation: Optional[SimulationConfig] = None) -> np.ndarray:
    """探针残差在 (x, t) 处的值, 即 G~(x, t; y) e_1 的数值近似"""
    _, raw = green_probe(model, profile, y, [t], config, simulation, keep_residuals=True)
    residual = raw["residuals"][0]
    return np.array([np.interp(x, raw["centers"], residual[:, a]) for a in range(residual.shape[1])])
