"""
线性 ODE W' = A(x) W 的四阶 Magnus 积分与连续正交化
"""

from typing import Callable, Iterable, List, Tuple

import numpy as np
from scipy import linalg

from utils.exceptions import EvansError

SQRT3 = np.sqrt(3.0)
GAUSS_OFFSETS = (0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0)
# 单步指数的谱半径上限, 防止 expm 溢出
MAX_STEP_GROWTH = 30.0

Coefficient = Callable[[float], np.ndarray]


def magnus4_generator(coefficient: Coefficient, x: float, h: float) -> np.ndarray:
    """两点 Gauss 节点上的四阶 Magnus 生成元 (h 可为负)"""
    A1 = coefficient(x + GAUSS_OFFSETS[0] * h)
    A2 = coefficient(x + GAUSS_OFFSETS[1] * h)
    return 0.5 * h * (A1 + A2) + (SQRT3 / 12.0) * h * h * (A2 @ A1 - A1 @ A2)


def magnus4_propagator(coefficient: Coefficient, x: float, h: float) -> np.ndarray:
    """从 x 到 x + h 的传播子 exp(Omega)"""
    return linalg.expm(magnus4_generator(coefficient, x, h))


def step_nodes(x_start: float, x_end: float, reference: Iterable[float], h_max: float) -> np.ndarray:
    """x_start 到 x_end 的积分节点: 包含参考网格点, 且相邻间距不超过 h_max"""
    lo, hi = min(x_start, x_end), max(x_start, x_end)
    ref = np.asarray([x for x in reference if lo < x < hi], dtype=float)
    base = np.unique(np.concatenate(([lo, hi], ref)))
    pieces = [base[:1]]
    for a, b in zip(base[:-1], base[1:]):
        count = max(1, int(np.ceil((b - a) / h_max)))
        pieces.append(np.linspace(a, b, count + 1)[1:])
    nodes = np.concatenate(pieces)
    return nodes if x_start <= x_end else nodes[::-1]


def orthonormalize(V: np.ndarray) -> Tuple[np.ndarray, complex]:
    """QR 正交化, 返回 (Q, sum log diag R)"""
    Q, R = linalg.qr(V, mode='economic')
    diag = np.diag(R).astype(complex)
    if np.any(diag == 0):
        raise EvansError("正交化时标架秩亏 (frame collapse)")
    return Q, complex(np.sum(np.log(diag)))


def orthogonal_flow(coefficient: Coefficient, V: np.ndarray, nodes: np.ndarray) -> Tuple[np.ndarray, complex, int]:
    """沿节点传播 k 维标架, 每步正交化并累计行列式的对数

    返回 (Q, log_det, steps), 使 W(x_end) 的 k-形式 = exp(log_det) * Q 的 k-形式。
    """
    Q, log_det = orthonormalize(np.asarray(V, dtype=complex))
    for x, x_next in zip(nodes[:-1], nodes[1:]):
        Q = magnus4_propagator(coefficient, float(x), float(x_next - x)) @ Q
        if not np.all(np.isfinite(Q)):
            raise EvansError(f"积分在 x={x_next:.6g} 处溢出")
        Q, increment = orthonormalize(Q)
        log_det += increment
    return Q, log_det, len(nodes) - 1


def orthogonal_frames(coefficient: Coefficient, V: np.ndarray, nodes: np.ndarray) -> List[np.ndarray]:
    """沿节点传播并正交化, 返回每个节点上的正交标架 (只保留子空间)"""
    Q, _ = orthonormalize(np.asarray(V, dtype=complex))
    frames = [Q]
    for x, x_next in zip(nodes[:-1], nodes[1:]):
        Q = magnus4_propagator(coefficient, float(x), float(x_next - x)) @ Q
        if not np.all(np.isfinite(Q)):
            raise EvansError(f"积分在 x={x_next:.6g} 处溢出")
        Q, _ = orthonormalize(Q)
        frames.append(Q)
    return frames


def fundamental_flow(coefficient: Coefficient, W: np.ndarray, nodes: np.ndarray) -> List[np.ndarray]:
    """不正交化地传播解矩阵, 返回每个节点上的值 (用于短区间与对偶检验)"""
    states = [np.asarray(W, dtype=complex)]
    for x, x_next in zip(nodes[:-1], nodes[1:]):
        states.append(magnus4_propagator(coefficient, float(x), float(x_next - x)) @ states[-1])
    return states
