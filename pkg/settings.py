"""Configuration and logging setup for fairdag.

Defaults live on a pydantic model; environment variables prefixed with
``FAIRDAG_`` override them. Library functions accept ``None`` for any
tunable and resolve it here, so an override reaches every entry point.
"""

import logging
import os
import sys
from collections.abc import Mapping
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pythonjsonlogger.json import JsonFormatter

from errors import ConfigError

LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]

# Environment variable -> settings field
_ENV_FIELDS = {
    "FAIRDAG_SIZE_CAP": "size_cap",
    "FAIRDAG_ALPHA": "alpha",
    "FAIRDAG_BINS": "bins",
    "FAIRDAG_LOG_LEVEL": "log_level",
}


class FairdagSettings(BaseModel):
    """Tunable defaults shared by every module.

    Attributes:
        size_cap: Largest joint table (in cells) built by brute force
        alpha: Significance level for empirical criteria
        bins: Equal-frequency bins per continuous conditioning column
        exact_tol: Cell-wise tolerance for exact independence decisions
        faithfulness_node_cap: Largest graph a faithfulness audit will
            enumerate
        log_level: Threshold for the stderr JSON log handler
    """

    model_config = ConfigDict(frozen=True)

    size_cap: int = Field(default=10_000_000, gt=0)
    alpha: float = Field(default=0.01, gt=0.0, lt=1.0)
    bins: int = Field(default=10, ge=1)
    exact_tol: float = Field(default=1e-9, ge=0.0)
    faithfulness_node_cap: int = Field(default=8, ge=1)
    log_level: LogLevel = "WARNING"


def load_settings(environ: Mapping[str, str] | None = None) -> FairdagSettings:
    """Build settings from defaults plus ``FAIRDAG_*`` overrides.

    Args:
        environ: Mapping to read overrides from (default: ``os.environ``)

    Returns:
        Validated, frozen settings

    Raises:
        ConfigError: If an override cannot be parsed or is out of range

    Examples:
        >>> load_settings({"FAIRDAG_SIZE_CAP": "1000"}).size_cap
        1000
    """
    environ = os.environ if environ is None else environ

    overrides = {
        field: environ[var].strip()
        for var, field in _ENV_FIELDS.items()
        if environ.get(var, "").strip()
    }
    if "log_level" in overrides:
        overrides["log_level"] = overrides["log_level"].upper()

    try:
        return FairdagSettings(**overrides)
    except ValidationError as error:
        raise ConfigError(f"Invalid FAIRDAG_* override: {error}") from error


def configure_logging(level: str | None = None) -> logging.Logger:
    """Route fairdag log records to stderr as JSON lines.

    Standard output is reserved for command results, so the handler is
    always bound to stderr. Calling this twice replaces the handler
    instead of stacking a second one.

    Args:
        level: Log level name (default: the loaded settings' log_level)

    Returns:
        The root logger, configured
    """
    level = (level or load_settings().log_level).upper()

    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_fairdag", False):
            root.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(
        JsonFormatter("%(asctime)s %(levelname)s %(name)s %(message)s")
    )
    handler._fairdag = True
    root.addHandler(handler)
    root.setLevel(level)
    return root
