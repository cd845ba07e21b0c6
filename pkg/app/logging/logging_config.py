# logging_config.py
import sys
from pathlib import Path

from loguru import logger

from app.config import settings

MODULES = ("distributions", "reliability", "classify", "pricing", "oracle", "cli")

# 1. Remove the default loguru handler
logger.remove()

# 2. stderr is the only console sink; stdout carries JSON / CSV output
logger.add(
    sys.stderr,
    level=settings.LOG_LEVEL,
    format="{time:HH:mm:ss} | {level: <8} | {extra[module]: <13} | {message}",
)


def module_filter(module_name):
    """Factory function to create a log filter based on the 'module' tag."""
    def filter_func(record):
        return record["extra"].get("module") == module_name
    return filter_func


# 3. One rotating file per module, only when asked for
if settings.LOG_TO_FILE:
    log_dir = Path(settings.LOG_DIR)
    for name in MODULES:
        logger.add(
            log_dir / f"{name}.log",
            rotation="10 MB",
            retention="30 days",
            level="DEBUG",
            filter=module_filter(name),
            enqueue=True,
        )

# Records logged without a binding still need the key for the console format
logger.configure(extra={"module": "-"})

distribution_logger = logger.bind(module="distributions")
reliability_logger = logger.bind(module="reliability")
classify_logger = logger.bind(module="classify")
pricing_logger = logger.bind(module="pricing")
oracle_logger = logger.bind(module="oracle")
cli_logger = logger.bind(module="cli")

__all__ = [
    "distribution_logger",
    "reliability_logger",
    "classify_logger",
    "pricing_logger",
    "oracle_logger",
    "cli_logger",
]
