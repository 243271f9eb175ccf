"""
边界层稳定性分析
Boundary-Layer Evans Stability Toolkit

双曲-抛物守恒律半直线非特征边界层的 Evans 函数判定与 Green 函数数值验证
"""

__version__ = "1.0.0"
__author__ = "Boundary Layer Stability Team"
__description__ = "非特征边界层 Evans 函数稳定性判定与 Green 函数数值验证工具"
