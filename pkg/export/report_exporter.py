"""
JSON 报告导出器
"""

import json
from pathlib import Path
from typing import Any, Union

from data.models import RunManifest, to_serializable
from utils.exceptions import ExportError
from utils.logger import get_logger

logger = get_logger(__name__)

MANIFEST_NAME = "manifest.json"


class ReportExporter:
    """把各阶段结果 (pydantic 模型或字典) 写为 JSON"""

    def __init__(self, directory: Union[str, Path] = "output"):
        self.directory = Path(directory)

    def export(self, name: str, payload: Any) -> str:
        output_path = self.directory / f"{name}.json"
        output_path.parent.mkdir(parents=True, exist_ok=True)
        try:
            with open(output_path, 'w', encoding='utf-8') as file:
                json.dump(to_serializable(payload), file, ensure_ascii=False, indent=2)
            logger.info(f"报告已保存到: {output_path}")
            return str(output_path)
        except Exception as e:
            logger.error(f"报告导出失败: {e}")
            raise ExportError(f"报告导出失败 ({name}): {e}")

    def export_manifest(self, manifest: RunManifest) -> str:
        return self.export(Path(MANIFEST_NAME).stem, manifest)

    @staticmethod
    def load(path: Union[str, Path]) -> Any:
        path = Path(path)
        if not path.exists():
            raise ExportError(f"报告文件不存在: {path}")
        try:
            return json.loads(path.read_text(encoding='utf-8'))
        except json.JSONDecodeError as e:
            raise ExportError(f"报告文件格式错误: {path}: {e}")

    @classmethod
    def load_manifest(cls, path: Union[str, Path]) -> RunManifest:
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        try:
            return RunManifest.model_validate(cls.load(path))
        except ExportError:
            raise
        except Exception as e:
            raise ExportError(f"运行清单无效: {path}: {e}")
