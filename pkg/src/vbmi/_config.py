"""TOML-backed loading of the line-oriented ``key = value`` config files."""

import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .exceptions import ConfigError


def load_config(source):
    """Parse a config file path or a literal text block into a dict."""
    if isinstance(source, Path) or (isinstance(source, str) and "=" not in source):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
