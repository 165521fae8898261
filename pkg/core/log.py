"""Tagged logging: every subsystem logs as `[TAG] message`."""
import logging

LOG_FORMAT = "[%(name)s] %(message)s"


def get_logger(tag: str) -> logging.Logger:
    """Logger for a subsystem tag such as TRAINER or GRAPH."""
    return logging.getLogger(tag.upper())


def configure_logging(level: str = "INFO") -> None:
    """Install the tagged formatter on the root logger (called once by the CLI)."""
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise ValueError(f"Unknown log level: {level}")
    logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)
