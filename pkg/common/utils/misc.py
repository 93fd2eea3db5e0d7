import math
import re
from typing import Any, Dict, List, Tuple

import orjson

from common.wqed.errors import ConfigError

ANGLE_PATTERN = re.compile(
    r"^\s*(?P<sign>[-+]?)(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*pi\s*$")


def parseAngle(value: Any) -> Any:
    """'0.1pi', 'pi' and '-2*pi' become multiples of pi; anything else is returned unchanged."""
    if not isinstance(value, str):
        return value
    match = ANGLE_PATTERN.match(value)
    if match is None:
        return value
    factor = float(match.group("number")) if match.group("number") else 1.0
    return (-factor if match.group("sign") == "-" else factor) * math.pi


def parseValue(text: str) -> Any:
    """Override values: JSON first, then the pi suffix, then the raw string."""
    try:
        return orjson.loads(text)
    except orjson.JSONDecodeError:
        pass
    angle = parseAngle(text)
    return angle if not isinstance(angle, str) else text


def parseOverride(override: str) -> Tuple[List[str], Any]:
    key, separator, value = override.partition("=")
    key = key.strip()
    if not separator or not key:
        raise ConfigError(f"override '{override}' is not of the form key=value", field=override)
    parts = key.split(".")
    if any(not part for part in parts):
        raise ConfigError(f"override key '{key}' has an empty path segment", field=key)
    return parts, parseValue(value)


def applyOverrides(document: Dict[str, Any], overrides: List[str], hasPath=None) -> Dict[str, Any]:
    """Set dotted keys in a nested configuration document.

    hasPath(parts) decides whether a key exists in the schema; intermediate
    objects are created when the document leaves them to their defaults.
    """
    for override in overrides or []:
        parts, value = parseOverride(override)
        if hasPath is not None and not hasPath(parts):
            raise ConfigError(f"unknown configuration key '{'.'.join(parts)}'", field=".".join(parts))
        node = document
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            elif not isinstance(child, dict):
                raise ConfigError(f"'{part}' is not an object in '{'.'.join(parts)}'", field=".".join(parts))
            node = child
        node[parts[-1]] = value
    return document
