"""
日志模块
未调用 setup_logging 时事件交给 stdlib 的 spinproc logger（挂 NullHandler），
作为库使用不会向 stdout 打印；调用方用 logging 配置处理器即可看到
"""
import logging
import sys
from typing import Any, List

import structlog

LIBRARY_LOGGER = "spinproc"


def _processors(renderer: Any) -> List[Any]:
    return [
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        renderer,
    ]


def configure_default() -> None:
    """库默认配置"""
    library = logging.getLogger(LIBRARY_LOGGER)
    if not any(isinstance(h, logging.NullHandler) for h in library.handlers):
        library.addHandler(logging.NullHandler())

    structlog.configure(
        processors=_processors(structlog.dev.ConsoleRenderer(colors=False)),
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )


def setup_logging(level: str = "INFO", json: bool = False) -> None:
    """配置日志"""
    log_level = getattr(logging, level.upper())

    logging.basicConfig(
        level=log_level,
        format="%(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )

    renderer: Any = (
        structlog.processors.JSONRenderer()
        if json
        else structlog.dev.ConsoleRenderer(colors=False)
    )

    structlog.configure(
        processors=_processors(renderer),
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


def get_logger(name: str) -> Any:
    """获取 logger"""
    return structlog.get_logger(f"{LIBRARY_LOGGER}.{name}")


if not structlog.is_configured():
    configure_default()
