"""
Logging setup and structured log lines for the MASSIVE toolkit.

Every record carries the run id and scenario seed of the command that
produced it, so lines from concurrent sweep points can be told apart.
"""
import contextvars
import json
import logging
import uuid
from typing import Any, Dict, Optional

run_id = contextvars.ContextVar("run_id", default=None)
run_seed = contextvars.ContextVar("run_seed", default=None)

LOG_FORMAT = "%(asctime)s %(levelname)-8s %(name)s:%(lineno)d [%(message)s]"


def setup_logging(level: int = logging.INFO) -> None:
    """Configure the root logger once; later calls only change the level."""
    root = logging.getLogger()
    if root.handlers:
        root.setLevel(level)
        return
    logging.basicConfig(level=level, format=LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")


def get_module_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


def _json_safe(obj: Any) -> Any:
    """Convert numpy scalars/arrays and nested containers to JSON-serializable values."""
    if hasattr(obj, "tolist") and hasattr(obj, "dtype"):
        return obj.tolist()
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(item) for item in obj]
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return str(obj)


def format_log_message(
    component: str,
    message: str,
    extra: Optional[Dict[str, Any]] = None
) -> str:
    """
    Render ``[component] message | {json}``.

    The JSON object always holds ``run_id`` and ``seed`` (null outside a
    RunContext); ``extra`` keys are merged after them.
    """
    ctx: Dict[str, Any] = {"run_id": run_id.get(), "seed": run_seed.get()}
    ctx.update(extra or {})
    return f"[{component}] {message} | {json.dumps(_json_safe(ctx))}"


def log_with_context(
    logger: logging.Logger,
    level: int,
    component: str,
    message: str,
    extra: Optional[Dict[str, Any]] = None
) -> None:
    """Emit format_log_message(...) at ``level`` if the logger would record it."""
    if not logger.isEnabledFor(level):
        return
    logger.log(level, format_log_message(component, message, extra))


class RunContext:
    """
    Context manager for run-scoped logging.

    Sets a fresh run id (and the scenario seed, when known) for the duration
    of a command or campaign, and restores the previous values on exit.
    """

    def __init__(self, seed: Optional[int] = None):
        self._tokens = []
        self._seed = seed
        self.run_id: Optional[str] = None

    def __enter__(self) -> "RunContext":
        self.run_id = str(uuid.uuid4())
        self._tokens = [run_id.set(self.run_id)]
        if self._seed is not None:
            self._tokens.append(run_seed.set(self._seed))
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        for token in reversed(self._tokens):
            token.var.reset(token)
        self._tokens = []
