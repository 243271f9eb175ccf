"""
边界扰动 h(t)
"""

from math import factorial
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from data.models import BoundaryCase, ForcingConfig
from utils.exceptions import ConfigError
from utils.logger import get_logger

logger = get_logger(__name__)


class BoundaryForcing:
    """边界扰动: algebraic 为 E_0 (1+t)^{-1} d, tabulated 为三次样条, none 为零

    流出情形只允许读取抛物分量 (parabolic)。
    """

    def __init__(self, n: int, kind: str = "none", amplitude: float = 0.0,
                 direction: Optional[Sequence[float]] = None, times: Optional[Sequence[float]] = None,
                 samples: Optional[Sequence[Sequence[float]]] = None):
        self.n = n
        self.kind = kind
        self.amplitude = float(amplitude)
        self.direction = np.ones(n) if direction is None else np.asarray(direction, dtype=float)
        if self.direction.shape != (n,):
            raise ConfigError(f"扰动方向长度 {self.direction.size} != n = {n}")
        self._spline = None
        if kind == "tabulated":
            if times is None or samples is None:
                raise ConfigError("tabulated 扰动需要 times 与 samples")
            samples = np.asarray(samples, dtype=float)
            if samples.shape != (len(times), n):
                raise ConfigError(f"samples 形状 {samples.shape} 与 (len(times), n) 不符")
            self._spline = CubicSpline(np.asarray(times, dtype=float), samples, axis=0)
        elif kind not in ("algebraic", "none"):
            raise ConfigError(f"未知扰动类型: {kind}")

    @classmethod
    def from_config(cls, n: int, config: Optional[ForcingConfig], case: BoundaryCase) -> "BoundaryForcing":
        if config is None or config.kind == "none":
            return cls(n)
        if config.kind == "tabulated" and case == "inflow":
            raise ConfigError("流入边界需要 h 的四阶导数, 请提供解析 (algebraic) 扰动")
        return cls(n, config.kind, config.amplitude, config.direction, config.times, config.samples)

    @property
    def is_zero(self) -> bool:
        return self.kind == "none" or (self.kind == "algebraic" and self.amplitude == 0.0)

    def derivative(self, t: float, order: int = 0) -> np.ndarray:
        """d^order h / dt^order"""
        if self.kind == "none":
            return np.zeros(self.n)
        if self.kind == "algebraic":
            scale = (-1) ** order * factorial(order) * (1.0 + t) ** (-order - 1)
            return self.amplitude * scale * self.direction
        if order > 3:
            return np.zeros(self.n)
        return np.asarray(self._spline(t, order), dtype=float)

    def value(self, t: float) -> np.ndarray:
        return self.derivative(t, 0)

    def hyperbolic(self, t: float, order: int = 0) -> float:
        return float(self.derivative(t, order)[0])

    def parabolic(self, t: float, order: int = 0) -> np.ndarray:
        return self.derivative(t, order)[1:]

    def measure(self, t: float, case: BoundaryCase) -> float:
        """B_h(t): 流出 sum_{r<=2} |h^(r)|^2; 流入 sum_{r<=4} |h_1^(r)|^2 + sum_{r<=2} |h_2^(r)|^2"""
        if case == "outflow":
            return float(sum(np.sum(self.parabolic(t, r) ** 2) for r in range(3)))
        hyperbolic = sum(self.hyperbolic(t, r) ** 2 for r in range(5))
        parabolic = sum(np.sum(self.parabolic(t, r) ** 2) for r in range(3))
        return float(hyperbolic + parabolic)

    def envelope_violation(self, times: Sequence[float], E0: Optional[float] = None) -> float:
        """max_t |h(t)| (1+t) / E_0; 大于 1 表示违反 |h| <= E_0 (1+t)^{-1}"""
        E0 = abs(self.amplitude) * float(np.max(np.abs(self.direction))) if E0 is None else E0
        if E0 == 0:
            return 0.0
        return float(max(np.max(np.abs(self.value(t))) * (1.0 + t) / E0 for t in times))
