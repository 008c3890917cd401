"""Key = value configuration files and runtime settings.

Config and profile files are line based::

    # comment
    alpha = 0.01
    tie-to-a = true

Keys are case-insensitive and ``-``/``_`` are interchangeable; they are
returned with underscores.
"""

from __future__ import annotations

import configparser
import logging
import os
from pathlib import Path

from FlowForgeLib.errors import ConfigError

logger = logging.getLogger(__name__)

THREADS_ENV = "FLOWFORGE_THREADS"

_SECTION = "flowforge"
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines.

    Raises:
        ConfigError: On a line without ``=`` or a repeated key
    """
    parser = configparser.ConfigParser(
        delimiters=("=",),
        comment_prefixes=("#",),
        inline_comment_prefixes=None,
        interpolation=None,
        strict=True,
    )
    try:
        parser.read_string(f"[{_SECTION}]\n{text}", source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}") from e

    values: dict[str, str] = {}
    for key, value in parser.items(_SECTION):
        name = normalize_key(key)
        if name in values:
            raise ConfigError(f"{source}: key {name!r} given twice")
        values[name] = value.strip()
    return values


def load_config(path: Path | str) -> dict[str, str]:
    """Load a ``key = value`` file.

    Raises:
        ConfigError: If the file cannot be read or parsed
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    values = parse_key_values(text, source=str(path))
    logger.debug(f"Loaded {len(values)} setting(s) from {path}")
    return values


def parse_bool(value: str, key: str = "value") -> bool:
    lowered = value.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def thread_count() -> int:
    """Worker cap from ``FLOWFORGE_THREADS``; defaults to the CPU count.

    Raises:
        ConfigError: If the variable is set but not a positive integer
    """
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if count < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return count
