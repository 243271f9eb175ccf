"""
自定义异常类定义
"""

from typing import Optional


class BoundaryLayerError(Exception):
    """基础异常类"""
    pass


class ConfigError(BoundaryLayerError):
    """配置文件相关错误"""
    pass


class ModelError(BoundaryLayerError):
    """模型结构或物理定义域错误"""
    pass


class ProfileError(BoundaryLayerError):
    """边界层剖面求解或衰减证书错误"""
    pass


class EvansError(BoundaryLayerError):
    """Evans函数计算错误"""
    pass


class ResolventError(BoundaryLayerError):
    """预解核构造错误"""
    pass


class SimulationError(BoundaryLayerError):
    """半直线数值模拟错误"""
    pass


class SimulationBlowUpError(SimulationError):
    """数值解发散或离开物理定义域"""

    def __init__(self, message: str, time: float, location: Optional[float] = None):
        super().__init__(message)
        self.time = time
        self.location = location


class ExportError(BoundaryLayerError):
    """导出相关错误"""
    pass
