"""
无穷远处稳定子空间的解析输运 (Kato 投影输运)
"""

from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from data.models import SubspacePath
from utils.exceptions import EvansError
from utils.logger import get_logger

logger = get_logger(__name__)

LimitSampler = Callable[[complex], np.ndarray]


def spectral_gap(A: np.ndarray) -> float:
    """min |Re mu| over sigma(A)"""
    return float(np.min(np.abs(np.linalg.eigvals(A).real)))


def stable_projector(A: np.ndarray, gap_min: float = 1e-8) -> Tuple[np.ndarray, np.ndarray, int]:
    """沿不稳定子空间到稳定子空间的谱投影 P, 稳定 Schur 基 Ys 与维数 k"""
    gap = spectral_gap(A)
    if gap < gap_min:
        raise EvansError(f"检测到中心子空间: min|Re mu| = {gap:.3e} < {gap_min:.1e}")
    A = np.asarray(A, dtype=complex)
    _, Zs, k = linalg.schur(A, output='complex', sort='lhp')
    _, Zu, m = linalg.schur(A, output='complex', sort='rhp')
    Ys, Yu = Zs[:, :k], Zu[:, :m]
    coords = linalg.solve(np.hstack((Ys, Yu)), np.eye(A.shape[0]))
    return Ys @ coords[:k], Ys, int(k)


def initial_frame(A: np.ndarray, gap_min: float = 1e-8) -> Tuple[np.ndarray, int]:
    """起点标架; 实矩阵取实 Schur 向量以保持共轭对称"""
    if np.all(np.imag(A) == 0):
        gap = spectral_gap(np.real(A))
        if gap < gap_min:
            raise EvansError(f"检测到中心子空间: min|Re mu| = {gap:.3e}")
        _, Z, k = linalg.schur(np.real(A), output='real', sort='lhp')
        return Z[:, :k].astype(complex), int(k)
    _, Ys, k = stable_projector(A, gap_min)
    return Ys, k


def kato_step(V: np.ndarray, P_old: np.ndarray, P_new: np.ndarray) -> np.ndarray:
    """V <- (I + D^2 / 2) P_new V, D = P_new - P_old"""
    D = P_new - P_old
    return (np.eye(len(V)) + 0.5 * D @ D) @ (P_new @ V)


def transport_frame(sampler: LimitSampler, V: np.ndarray, lam_from: complex, lam_to: complex,
                    k: int, kato_rel: float = 0.05, gap_min: float = 1e-8,
                    scale_floor: float = 1e-12) -> Tuple[np.ndarray, float]:
    """沿直线段把标架从 lam_from 输运到 lam_to, 返回 (V, 段上最小谱隙)"""
    P_old, _, k_old = stable_projector(sampler(lam_from), gap_min)
    if k_old != k:
        raise EvansError(f"lam={lam_from:.6g} 处稳定维数 {k_old} != {k}")
    length = abs(lam_to - lam_from)
    local = max(min(abs(lam_from), abs(lam_to)), scale_floor)
    substeps = max(1, int(np.ceil(length / (kato_rel * local))))
    min_gap = np.inf

    for s in range(1, substeps + 1):
        lam = lam_from + (lam_to - lam_from) * s / substeps
        A = sampler(lam)
        min_gap = min(min_gap, spectral_gap(A))
        P_new, _, k_new = stable_projector(A, gap_min)
        if k_new != k:
            raise EvansError(f"一致分裂失败: lam={lam:.6g} 处稳定维数 {k_new} != {k}")
        V = kato_step(V, P_old, P_new)
        P_old = P_new
    return V, min_gap


def stable_basis_at_infinity(sampler: LimitSampler, lambdas: Sequence[complex], k: Optional[int] = None,
                             gap_min: float = 1e-8, kato_rel: float = 0.05,
                             scale_floor: Optional[float] = None) -> SubspacePath:
    """沿 lam 路径解析输运 S_+(lam) 的标架"""
    lambdas = np.asarray(lambdas, dtype=complex)
    if lambdas.size == 0:
        raise EvansError("lam 路径为空")
    floor = scale_floor if scale_floor is not None else max(float(np.min(np.abs(lambdas))), 1e-12)

    V, k0 = initial_frame(sampler(lambdas[0]), gap_min)
    if k is not None and k0 != k:
        raise EvansError(f"一致分裂失败: lam={lambdas[0]:.6g} 处 dim S_+ = {k0}, 边界矩阵秩 = {k}")
    frames = [V]
    min_gap = spectral_gap(sampler(lambdas[0]))

    for lam_from, lam_to in zip(lambdas[:-1], lambdas[1:]):
        V, gap = transport_frame(sampler, V, lam_from, lam_to, k0, kato_rel, gap_min, floor)
        frames.append(V)
        min_gap = min(min_gap, gap)

    logger.debug(f"稳定子空间输运完成: {lambdas.size} 个点, k={k0}, min gap={min_gap:.3e}")
    return SubspacePath(lambdas=lambdas, frames=np.array(frames), k=k0, min_gap=float(min_gap))


def principal_angles(V: np.ndarray, W: np.ndarray) -> np.ndarray:
    """两个子空间之间的主角"""
    return linalg.subspace_angles(V, W)
