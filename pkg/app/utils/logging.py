import functools
import logging
import os
import sys
import time
from datetime import datetime, timezone
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from pythonjsonlogger import jsonlogger

PERFORMANCE_LOGGER = 'dynhazard.performance'


class EnhancedJsonFormatter(jsonlogger.JsonFormatter):
    """JSON formatter with source location and application fields"""

    def add_fields(self, log_record, record, message_dict):
        super().add_fields(log_record, record, message_dict)

        log_record['timestamp'] = datetime.now(timezone.utc).isoformat().replace('+00:00', 'Z')
        log_record['level'] = record.levelname
        log_record['logger'] = record.name
        log_record['function'] = record.funcName
        log_record['line'] = record.lineno
        log_record['module'] = record.module
        log_record['thread'] = record.threadName
        log_record['application'] = 'DynHazard'
        log_record['process_id'] = os.getpid()

        if hasattr(record, 'duration_ms'):
            log_record['duration_ms'] = record.duration_ms
        if hasattr(record, 'extra_fields'):
            log_record.update(record.extra_fields)


def setup_logging(log_level: str = "INFO", log_dir: Optional[str] = "logs", to_file: bool = False):
    """
    Structured logging for library and CLI runs:
    - JSON lines on stderr (stdout is reserved for CLI result records)
    - optional size-rotated JSON file plus a separate performance log
    """
    logger = logging.getLogger()
    logger.setLevel(getattr(logging, log_level.upper()))
    logger.handlers.clear()

    json_formatter = EnhancedJsonFormatter(
        '%(timestamp)s %(level)s %(logger)s %(function)s:%(lineno)d %(message)s'
    )

    # ============================================
    # 1. CONSOLE HANDLER
    # ============================================
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(getattr(logging, log_level.upper()))
    console.setFormatter(json_formatter)
    logger.addHandler(console)

    perf_logger = logging.getLogger(PERFORMANCE_LOGGER)
    perf_logger.handlers.clear()
    perf_logger.setLevel(logging.INFO)

    # ============================================
    # 2. FILE HANDLERS (opt-in)
    # ============================================
    if to_file and log_dir:
        log_path = Path(log_dir)
        log_path.mkdir(parents=True, exist_ok=True)

        file_handler = RotatingFileHandler(
            filename=log_path / "dynhazard.log",
            maxBytes=10 * 1024 * 1024,
            backupCount=5,
            encoding='utf-8'
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(json_formatter)
        logger.addHandler(file_handler)

        perf_handler = RotatingFileHandler(
            filename=log_path / "dynhazard_perf.log",
            maxBytes=5 * 1024 * 1024,
            backupCount=3,
            encoding='utf-8'
        )
        perf_handler.setFormatter(EnhancedJsonFormatter(
            '%(timestamp)s %(level)s %(logger)s %(function)s %(message)s'
        ))
        perf_logger.addHandler(perf_handler)
        perf_logger.propagate = False

    logger.debug(f"Logging initialized at level {log_level}")
    return logger


# ============================================
# DECORATORS
# ============================================

def log_performance(logger_name: str = PERFORMANCE_LOGGER):
    """Decorator to log wall time of heavy synchronous calls"""
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            result = func(*args, **kwargs)
            duration_ms = (time.perf_counter() - start_time) * 1000
            logging.getLogger(logger_name).info(
                f"Function {func.__name__} completed",
                extra={'duration_ms': round(duration_ms, 3),
                       'extra_fields': {'target': func.__qualname__}}
            )
            return result
        return wrapper
    return decorator


def log_with_context(**extra_fields):
    """Decorator that logs entry, exit and failure with structured context"""
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            logger = logging.getLogger(func.__module__)
            logger.debug(f"Entering {func.__name__}",
                         extra={'extra_fields': {**extra_fields, 'action': 'enter'}})
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                logger.error(f"Error in {func.__name__}: {e}",
                             extra={'extra_fields': {**extra_fields, 'action': 'error', 'error': str(e)}})
                raise
            logger.debug(f"Exiting {func.__name__}",
                         extra={'extra_fields': {**extra_fields, 'action': 'exit'}})
            return result
        return wrapper
    return decorator
