"""
逐点衰减模板 theta, psi1, psi2 与 Green 函数包络
"""

from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from data.models import EndpointData
from utils.logger import get_logger

logger = get_logger(__name__)


def _gaussian(offset, t, M):
    """exp(-offset^2 / (M t)), t = 0 时退化为 offset == 0 的指示函数"""
    offset, t = np.broadcast_arrays(np.asarray(offset, dtype=float), np.asarray(t, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.exp(-offset ** 2 / (M * t))
    return np.where(t > 0, value, (offset == 0).astype(float))


def cutoff(endpoint: EndpointData, x, t) -> np.ndarray:
    """chi(x, t) = 1 on [0, max(a_n, 0) t]"""
    a_n = max(float(endpoint.a_plus[-1]), 0.0)
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    return ((x >= 0) & (x <= a_n * t)).astype(float)


def template_eval(endpoint: EndpointData, M: float, x, t) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """返回 (theta, psi1, psi2)"""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    chi = cutoff(endpoint, x, t)
    theta = np.zeros(x.shape)
    psi1 = np.zeros(x.shape)
    for a in endpoint.a_plus[endpoint.a_plus > 0]:
        theta += (1 + t) ** -0.5 * _gaussian(x - a * t, t, M)
        psi1 += (1 + np.abs(x) + t) ** -0.5 * (1 + np.abs(x - a * t)) ** -0.5
    psi1 *= chi
    a_n = float(endpoint.a_plus[-1])
    psi2 = (1 - chi) * (1 + np.abs(x - a_n * t) + np.sqrt(t)) ** -1.5
    return theta, psi1, psi2


def green_envelope(endpoint: EndpointData, M: float, x, t, y: float) -> np.ndarray:
    """Green 函数光滑部分的包络

    sum_k t^{-1/2} e^{-(x-y-a_k t)^2/(M t)}
      + sum_{a_k<0<a_j} chi{|a_k t| >= |y|} t^{-1/2} e^{-(x - a_j (t - |y/a_k|))^2/(M t)}
    """
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    scale = np.where(t > 0, 1.0 / np.sqrt(np.where(t > 0, t, 1.0)), 0.0)
    envelope = np.zeros(x.shape)
    speeds = endpoint.a_plus
    for a in speeds:
        envelope += scale * _gaussian(x - y - a * t, t, M)
    for a_k in speeds[speeds < 0]:
        reached = (np.abs(a_k * t) >= abs(y)).astype(float)
        for a_j in speeds[speeds > 0]:
            envelope += reached * scale * _gaussian(x - a_j * (t - abs(y / a_k)), t, M)
    return envelope


def fit_template_constant(residual: np.ndarray, x, t, y: float, endpoint: EndpointData,
                          candidates: Optional[Sequence[float]] = None) -> Dict[str, float]:
    """在对数网格上扫描 M, 使 max |residual| / envelope 最小"""
    candidates = np.logspace(-1, 2, 31) if candidates is None else np.asarray(candidates, dtype=float)
    residual = np.abs(np.asarray(residual, dtype=float))
    best_M, best_ratio = float(candidates[0]), np.inf
    for M in candidates:
        envelope = green_envelope(endpoint, float(M), x, t, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(residual > 0, residual / np.maximum(envelope, 1e-300), 0.0)
        worst = float(np.max(ratio)) if ratio.size else 0.0
        if worst < best_ratio:
            best_M, best_ratio = float(M), worst
    logger.debug(f"模板常数 M={best_M:.4g}, 最大比值 {best_ratio:.4g}")
    return {"M": best_M, "ratio": best_ratio}
