import json
import logging
from datetime import datetime
from fractions import Fraction
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, Optional

from prodist.core.config import ProdistConfig


def _default(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    if hasattr(value, "item"):
        return value.item()
    return str(value)


class SystemLogger:
    """
    JSONL run log with rotation, one line per event.
    Singleton-ish access pattern via class method.
    """
    _instance = None

    def __init__(self, config: ProdistConfig):
        self.config = config
        self.logger = logging.getLogger("prodist.system")
        self.logger.setLevel(logging.INFO)
        self.logger.propagate = False

        # re-initialisation must not stack handlers
        if self.logger.hasHandlers():
            self.logger.handlers.clear()

        if not config.logging.enabled:
            self.logger.addHandler(logging.NullHandler())
            return

        log_dir = Path(config.logging.log_dir)
        if not log_dir.is_absolute():
            log_dir = Path.cwd() / log_dir
        log_dir.mkdir(parents=True, exist_ok=True)

        handler = RotatingFileHandler(
            log_dir / "system.jsonl",
            maxBytes=config.logging.max_size_mb * 1024 * 1024,
            backupCount=config.logging.backup_count,
            encoding="utf-8",
        )
        handler.setFormatter(JSONLFormatter())
        self.logger.addHandler(handler)

    @classmethod
    def get_instance(cls, config: Optional[ProdistConfig] = None) -> "SystemLogger":
        if cls._instance is None:
            if config is None:
                from prodist.core.config import load_config
                config = load_config()
            cls._instance = cls(config)
        return cls._instance

    def log(self, event_type: str, data: Dict[str, Any], run_id: Optional[str] = None, level: str = "INFO"):
        """
        Logs a structured event.

        Args:
            event_type: Event category (e.g. 'COMMAND_RUN', 'BOUND_INAPPLICABLE').
            data: Key-value payload; Fractions are written as "a/b" strings.
            run_id: Identifier shared by every event of one CLI invocation.
            level: Log level (INFO, WARNING, ERROR).
        """
        if not self.config.logging.enabled:
            return

        payload = {
            "timestamp": datetime.now().isoformat(),
            "event": event_type,
            "run_id": run_id,
            "level": level,
            "data": data,
        }
        log_method = getattr(self.logger, level.lower(), self.logger.info)
        log_method(payload)


class JSONLFormatter(logging.Formatter):
    """
    Format standard logging records as JSONL.
    Expects `msg` to be a dict or string.
    """
    def format(self, record):
        if isinstance(record.msg, dict):
            return json.dumps(record.msg, default=_default)
        return json.dumps({
            "timestamp": datetime.fromtimestamp(record.created).isoformat(),
            "event": "SYSTEM_MSG",
            "level": record.levelname,
            "data": {"message": str(record.msg)},
        }, default=_default)
