"""Structured logging for strataquad.

Numerical modules log snake_case events with key/value context through
``get_logger(__name__)``. Rendering is chosen once by ``configure_logging``:
a colored console format for interactive runs, or one JSON object per line
(STRATAQUAD_LOG_FORMAT=json) for sweeps driven by scripts. Values coming out
of numpy are converted to plain Python before rendering, and
``run_context`` tags every event of an experiment run with its name.
"""

import logging
import sys
from contextlib import contextmanager
from typing import Any, Iterator

import numpy as np
import structlog
from structlog.typing import EventDict, WrappedLogger

# third-party loggers that flood DEBUG output while plots are written
QUIET_LOGGERS = ("matplotlib", "PIL")


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return type(value)(_plain(v) for v in value)
    return value


def plain_values(logger: WrappedLogger, method_name: str, event_dict: EventDict) -> EventDict:
    """Processor replacing numpy scalars and arrays with Python values."""
    return {key: _plain(value) for key, value in event_dict.items()}


def configure_logging(log_level: str = "WARNING", log_format: str = "console") -> None:
    """Route structlog and stdlib logging through one stderr handler.

    Args:
        log_level: Level name, case-insensitive; unknown names fall back to INFO.
        log_format: 'json' for JSON lines, anything else for console output.
    """
    shared_processors = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.UnicodeDecoder(),
        plain_values,
    ]

    if log_format == "json":
        renderer = structlog.processors.JSONRenderer()
    else:
        renderer = structlog.dev.ConsoleRenderer(
            colors=sys.stderr.isatty(),
            exception_formatter=structlog.dev.plain_traceback,
        )

    structlog.configure(
        processors=shared_processors + [structlog.stdlib.ProcessorFormatter.wrap_for_formatter],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(
        structlog.stdlib.ProcessorFormatter(
            foreign_pre_chain=shared_processors,
            processors=[structlog.stdlib.ProcessorFormatter.remove_processors_meta, renderer],
        )
    )

    root_logger = logging.getLogger()
    root_logger.handlers.clear()
    root_logger.addHandler(handler)
    root_logger.setLevel(getattr(logging, log_level.upper(), logging.INFO))

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)


@contextmanager
def run_context(**values: Any) -> Iterator[None]:
    """Bind ``values`` to every event logged inside the block, in this thread."""
    with structlog.contextvars.bound_contextvars(**values):
        yield


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    return structlog.get_logger(name)
