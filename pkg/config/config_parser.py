"""
配置文件解析器

支持 YAML (.yaml/.yml) 与 JSON (.json) 两种格式，按后缀选择解析器，
解析后用 data.models.RunConfig 做结构校验。
"""

import copy
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic import ValidationError

from data.builtin_systems import BuiltinSystems
from data.models import RunConfig
from utils.exceptions import ConfigError
from utils.logger import get_logger

logger = get_logger(__name__)

REQUIRED_SECTIONS = ['model']


def format_validation_error(error: ValidationError) -> str:
    """把 pydantic 校验错误整理为 “字段路径: 信息” 的多行文本"""
    lines = []
    for item in error.errors():
        path = ".".join(str(part) for part in item.get("loc", ()))
        lines.append(f"{path}: {item.get('msg', '')}")
    return "\n".join(lines)


class ConfigParser:
    """配置文件解析器"""

    def __init__(self, config_path: str = "config.yaml"):
        self.config_path = Path(config_path)
        self.config: Dict[str, Any] = {}
        self.run_config: Optional[RunConfig] = None
        self.load_config()

    @property
    def is_json(self) -> bool:
        return self.config_path.suffix.lower() == ".json"

    def load_config(self):
        """加载配置文件"""
        if not self.config_path.exists():
            raise ConfigError(f"配置文件不存在: {self.config_path}")

        try:
            text = self.config_path.read_text(encoding='utf-8')
        except Exception as e:
            raise ConfigError(f"读取配置文件失败: {e}")

        try:
            if self.is_json:
                self.config = json.loads(text) if text.strip() else {}
            else:
                self.config = yaml.safe_load(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"配置文件格式错误 (第 {e.lineno} 行, 第 {e.colno} 列): {e.msg}")
        except yaml.YAMLError as e:
            mark = getattr(e, 'problem_mark', None)
            if mark is not None:
                raise ConfigError(f"配置文件格式错误 (第 {mark.line + 1} 行, 第 {mark.column + 1} 列): {e}")
            raise ConfigError(f"配置文件格式错误: {e}")

        if not self.config:
            raise ConfigError("配置文件为空")
        if not isinstance(self.config, dict):
            raise ConfigError("配置文件顶层必须是映射")

        logger.info(f"成功加载配置文件: {self.config_path}")
        self._validate_config()

    def _validate_config(self):
        """验证配置文件格式"""
        for section in REQUIRED_SECTIONS:
            if section not in self.config:
                raise ConfigError(f"配置文件缺少必要部分: {section}")

        try:
            self.run_config = RunConfig.model_validate(self.config)
        except ValidationError as e:
            raise ConfigError(f"配置校验失败:\n{format_validation_error(e)}")

        preset = self.run_config.model.preset
        if preset is not None and preset not in BuiltinSystems().list_systems():
            raise ConfigError(f"model.preset: 未知的内置系统 {preset}")

    def get_run_config(self) -> RunConfig:
        """获取校验后的完整配置"""
        return self.run_config

    def get_model_config(self) -> Dict[str, Any]:
        """获取模型配置"""
        return self.config.get('model', {})

    def get_profile_config(self) -> Dict[str, Any]:
        """获取剖面配置"""
        return self.config.get('profile', {})

    def get_evans_config(self) -> Dict[str, Any]:
        """获取Evans配置"""
        return self.config.get('evans', {})

    def get_resolvent_config(self) -> Dict[str, Any]:
        """获取预解核配置"""
        return self.config.get('resolvent', {})

    def get_simulation_config(self) -> Dict[str, Any]:
        """获取模拟配置"""
        return self.config.get('simulation', {})

    def get_logging_config(self) -> Dict[str, Any]:
        """获取日志配置"""
        return self.config.get('logging', {})

    def get(self, key: str, default: Any = None) -> Any:
        """获取配置值"""
        keys = key.split('.')
        value = self.config
        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value

    def update_config(self, key: str, value: Any):
        """更新配置值并重新校验"""
        keys = key.split('.')
        updated = copy.deepcopy(self.config)
        section = updated
        for k in keys[:-1]:
            if k not in section or not isinstance(section[k], dict):
                section[k] = {}
            section = section[k]
        section[keys[-1]] = value

        previous = self.config
        self.config = updated
        try:
            self._validate_config()
        except ConfigError:
            self.config = previous
            raise

    def save_config(self, path: Optional[str] = None):
        """保存配置到文件"""
        target = Path(path) if path else self.config_path
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, 'w', encoding='utf-8') as file:
                if target.suffix.lower() == ".json":
                    json.dump(self.config, file, ensure_ascii=False, indent=2)
                else:
                    yaml.safe_dump(self.config, file, default_flow_style=False, allow_unicode=True)
            logger.info(f"配置已保存到: {target}")
        except Exception as e:
            raise ConfigError(f"保存配置文件失败: {e}")

    def config_hash(self) -> str:
        """配置内容的 sha256 (规范化 JSON)"""
        canonical = json.dumps(self.config, sort_keys=True, ensure_ascii=False, default=str)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def get_config_path(self) -> Path:
        """获取配置文件路径"""
        return self.config_path
