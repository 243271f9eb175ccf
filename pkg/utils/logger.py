"""
日志工具模块
"""

import logging
import logging.handlers
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

ROOT_LOGGER_NAME = "bl_evans"


def _qualified_name(name: str) -> str:
    if name == ROOT_LOGGER_NAME or name.startswith(ROOT_LOGGER_NAME + "."):
        return name
    return f"{ROOT_LOGGER_NAME}.{name}"


class Logger:
    """日志管理器

    所有模块日志器都挂在 ``bl_evans`` 根日志器下，处理器只配置在根上。
    """

    def __init__(self, name: str = ROOT_LOGGER_NAME):
        self.name = _qualified_name(name)
        self.logger = logging.getLogger(self.name)
        root = logging.getLogger(ROOT_LOGGER_NAME)
        if not root.handlers:
            self.setup_logger()

    def setup_logger(self, level: str = "INFO", log_file: Optional[str] = None,
                     max_bytes: int = 10 * 1024 * 1024, backup_count: int = 5):
        """设置日志配置（作用于根日志器）"""
        root = logging.getLogger(ROOT_LOGGER_NAME)

        numeric_level = getattr(logging, str(level).upper(), logging.INFO)
        root.setLevel(numeric_level)
        root.propagate = False

        # 清除现有处理器
        for handler in list(root.handlers):
            root.removeHandler(handler)
            handler.close()

        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )

        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        root.addHandler(console_handler)

        if log_file:
            Path(log_file).parent.mkdir(parents=True, exist_ok=True)

            file_handler = logging.handlers.RotatingFileHandler(
                log_file,
                maxBytes=max_bytes,
                backupCount=backup_count,
                encoding='utf-8'
            )
            file_handler.setFormatter(formatter)
            root.addHandler(file_handler)

    def info(self, message: str):
        """记录信息级别日志"""
        self.logger.info(message)

    def warning(self, message: str):
        """记录警告级别日志"""
        self.logger.warning(message)

    def error(self, message: str):
        """记录错误级别日志"""
        self.logger.error(message)

    def debug(self, message: str):
        """记录调试级别日志"""
        self.logger.debug(message)

    def exception(self, message: str):
        """记录异常信息"""
        self.logger.exception(message)

    @contextmanager
    def timed(self, label: str) -> Iterator[None]:
        """记录一个计算阶段的耗时"""
        start = time.perf_counter()
        self.info(f"{label} 开始")
        try:
            yield
        finally:
            self.info(f"{label} 结束, 用时 {time.perf_counter() - start:.2f}s")


# 全局日志实例
logger = Logger()


def get_logger(name: str = ROOT_LOGGER_NAME) -> Logger:
    """获取日志实例"""
    return Logger(name)
