"""
内置系统目录模块
"""

import copy
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

from utils.exceptions import ConfigError
from utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_CATALOG_PATH = Path(__file__).parent / "builtin_systems.json"

# 目录文件缺失时写回的最小目录
DEFAULT_SYSTEMS: Dict[str, Dict[str, Any]] = {
    "isentropic_inflow": {
        "kind": "isentropic",
        "boundary_case": "inflow",
        "description": "等熵气体 (Lagrange 坐标), 流入型小振幅边界层",
        "params": {"gamma": 1.4, "viscosity": 1.0, "sigma": 1.0, "v_minus": 1.0},
        "u_plus": [0.8, 0.0],
        "u_boundary": [0.9, 0.1],
    },
    "linear_coupled": {
        "kind": "linear",
        "boundary_case": "inflow",
        "description": "耦合线性系统, A_* = 1, eta_* = 1",
        "flux_matrix": [[1.0, -1.0], [-1.0, 0.0]],
        "viscosity_matrix": [[0.0, 0.0], [0.0, 1.0]],
        "u_plus": [0.0, 0.0],
        "u_boundary": [0.0, 0.0],
    },
}


class BuiltinSystems:
    """内置系统目录管理器"""

    def __init__(self, catalog_path: Optional[str] = None):
        self.catalog_path = Path(catalog_path) if catalog_path else DEFAULT_CATALOG_PATH
        self.systems: Dict[str, Dict[str, Any]] = {}
        self.load_catalog()

    def load_catalog(self):
        """加载系统目录"""
        try:
            if not self.catalog_path.exists():
                logger.info(f"系统目录不存在，将创建默认目录: {self.catalog_path}")
                self.create_default_catalog()
                return

            with open(self.catalog_path, 'r', encoding='utf-8') as file:
                data = json.load(file)

            self.systems = data.get('systems', {})
            logger.debug(f"成功加载系统目录，共 {len(self.systems)} 个系统")

        except json.JSONDecodeError as e:
            logger.error(f"系统目录格式错误: {e}")
            raise ConfigError(f"系统目录格式错误: {e}")
        except Exception as e:
            logger.error(f"加载系统目录失败: {e}")
            raise ConfigError(f"加载系统目录失败: {e}")

    def create_default_catalog(self):
        """创建默认目录"""
        self.systems = copy.deepcopy(DEFAULT_SYSTEMS)
        self.save_catalog()

    def save_catalog(self):
        """保存目录到文件"""
        try:
            self.catalog_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.catalog_path, 'w', encoding='utf-8') as file:
                json.dump({"systems": self.systems}, file, ensure_ascii=False, indent=2)
            logger.info(f"系统目录已保存到: {self.catalog_path}")
        except Exception as e:
            logger.error(f"保存系统目录失败: {e}")
            raise ConfigError(f"保存系统目录失败: {e}")

    def list_systems(self) -> List[str]:
        """列出全部系统名称"""
        return sorted(self.systems)

    def get_system(self, name: str) -> Dict[str, Any]:
        """获取系统定义 (深拷贝)"""
        if name not in self.systems:
            raise ConfigError(f"未知的内置系统: {name}")
        return copy.deepcopy(self.systems[name])

    def resolve(self, model_config: Dict[str, Any]) -> Dict[str, Any]:
        """把 preset 与显式字段合并为完整模型定义, 显式字段优先"""
        resolved: Dict[str, Any] = {}
        preset = model_config.get('preset')
        if preset:
            resolved = self.get_system(preset)
            resolved['name'] = preset

        for key, value in model_config.items():
            if key == 'preset' or value is None:
                continue
            if key == 'params':
                merged = dict(resolved.get('params', {}))
                merged.update(value)
                resolved['params'] = merged
            else:
                resolved[key] = value

        resolved.setdefault('name', resolved.get('kind', 'custom'))
        resolved.pop('description', None)
        return resolved
