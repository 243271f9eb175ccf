"""
数值 Laplace 反变换重构 Green 函数的光滑部分

G~(x, t; y) = (1/pi) Re int_0^inf e^{(eta0 + i w) t} (G_lambda - H_lambda)(x, y) dw,  eta0 = 1/t
H_lambda (输运 delta) 不参与求积。
"""

from typing import Any, Dict, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from core.coefficients import ReducedField
from core.eigen_system import HPEigenSystem
from core.hp_model import Model
from core.resolvent import ResolventBuilder, transported_delta
from utils.exceptions import BoundaryLayerError, ResolventError
from utils.logger import get_logger
from utils.parallel import parallel_map

logger = get_logger(__name__)

GAUSS_ORDER = 8


def panel_width(t: float, travel: float) -> float:
    """每个 Gauss 面板覆盖被积函数半个振荡周期"""
    return np.pi / max(t, travel, 1.0)


def green_via_ilt(builder: ResolventBuilder, x: float, t: float, y: float,
                  field: Optional[ReducedField] = None, rel_tol: float = 1e-4, abs_tol: float = 1e-10,
                  initial_panels: int = 16, max_doublings: int = 8, threads: int = 1) -> Dict[str, object]:
    """沿 Re lambda = 1/t 的竖直线求积, 截断长度 T 加倍直到收敛

    返回 value (n x n), error (最后一次加倍的变化), truncation, evaluations, converged。
    """
    if t <= 0:
        raise ResolventError(f"反变换要求 t > 0: {t}")
    field = field or ReducedField(builder.system.coefficients)
    eta0 = 1.0 / t
    travel = abs(float(field.tau(x) - field.tau(y)))
    width = panel_width(t, travel)
    nodes, weights = leggauss(GAUSS_ORDER)

    def integrand(omega: float) -> np.ndarray:
        lam = complex(eta0, omega)
        smooth = builder.value(lam, x, y) - transported_delta(field, lam, x, y)
        return np.exp(lam * t) * smooth

    def integrate(a: float, b: float) -> np.ndarray:
        edges = np.arange(a, b + 0.5 * width, width)
        points, scales = [], []
        for left, right in zip(edges[:-1], edges[1:]):
            half = 0.5 * (right - left)
            points.extend(left + half * (nodes + 1.0))
            scales.extend(half * weights)
        values = parallel_map(integrand, points, threads=threads, desc=f"ILT [{a:.3g}, {b:.3g}]", disable=True)
        return np.tensordot(np.array(scales), np.array(values), axes=(0, 0)), len(points)

    T = initial_panels * width
    total, evaluations = integrate(0.0, T)
    error, converged = np.inf, False
    for _ in range(max_doublings):
        increment, count = integrate(T, 2 * T)
        evaluations += count
        total = total + increment
        T *= 2
        error = float(np.max(np.abs(increment.real))) / np.pi
        if error <= max(rel_tol * float(np.max(np.abs(total.real))) / np.pi, abs_tol):
            converged = True
            break

    value = total.real / np.pi
    if not converged:
        logger.warning(f"ILT 未收敛: x={x:g}, t={t:g}, y={y:g}, T={T:.4g}, 误差估计 {error:.3e}")
    logger.debug(f"ILT G~({x:g}, {t:g}; {y:g}): {evaluations} 次核求值, T={T:.4g}")
    return {"value": value, "error": error, "truncation": T, "evaluations": evaluations, "converged": converged}


def green_function_ilt(model: Model, profile, x: float, t: float, y: float,
                       contour_params: Optional[Dict[str, Any]] = None, x_max: Optional[float] = None,
                       step_factor: float = 0.5, cond_max: float = 1e10, threads: int = 1) -> Dict[str, object]:
    """由模型和剖面直接计算 G~(x, t; y)

    contour_params 透传给 green_via_ilt (rel_tol, abs_tol, initial_panels, max_doublings)。
    """
    try:
        system = HPEigenSystem(model, profile, x_max=x_max)
        builder = ResolventBuilder(system, step_factor, cond_max)
        return green_via_ilt(builder, x, t, y, threads=threads, **(contour_params or {}))
    except BoundaryLayerError:
        raise
    except Exception as e:
        logger.error(f"反 Laplace 变换失败: {e}")
        raise ResolventError(f"反 Laplace 变换失败: {e}")
