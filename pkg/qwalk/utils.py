"""
Utility functions for the quantum-walk toolkit.
"""
import hashlib
import json
import logging
import re
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, List, Optional

import numpy as np
import pandas as pd
import pytz
import yaml
from pydantic import ValidationError

from .config import get_settings
from .exceptions import ConfigError

FLOAT_FORMAT = "%.17g"


def setup_logging(name: str = "qwalk") -> logging.Logger:
    """Setup structured logging for the toolkit."""
    settings = get_settings()

    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.log_file:
        handlers.append(logging.FileHandler(settings.log_file))

    logging.basicConfig(
        level=getattr(logging, settings.log_level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers
    )

    return logging.getLogger(name)


def now_in_timezone(timezone: Optional[str] = None) -> datetime:
    """
    Current wall-clock time, timezone-aware.

    Args:
        timezone: IANA zone name, defaults to the configured one

    Returns:
        Aware datetime
    """
    tz = pytz.timezone(timezone or get_settings().timezone)
    return datetime.now(tz)


def parse_seed_range(text: str) -> List[int]:
    """
    Parse a seed range such as "1..100" or a single seed "7".

    Args:
        text: Range expression, inclusive on both ends

    Returns:
        List of seeds in increasing order
    """
    match = re.fullmatch(r"\s*(-?\d+)\s*(?:\.\.\s*(-?\d+)\s*)?", text)
    if not match:
        raise ValueError(f"Seed range must look like A..B, got '{text}'")
    first = int(match.group(1))
    last = int(match.group(2)) if match.group(2) is not None else first
    if last < first:
        raise ValueError(f"Seed range {text} is empty")
    return list(range(first, last + 1))


def read_yaml(path: Path) -> Any:
    """
    Load a YAML document, reporting syntax errors with their position.

    Raises:
        ConfigError: If the file is missing or cannot be parsed
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"File not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return yaml.safe_load(handle)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        column = mark.column + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"Cannot parse {path.name}: {problem}", line=line, column=column) from exc


def validation_field(exc: ValidationError) -> str:
    """Dotted location of the first validation error."""
    errors = exc.errors()
    if not errors:
        return ""
    return ".".join(str(part) for part in errors[0].get("loc", ()))


def canonical_json(payload: Any) -> str:
    """Serialize with sorted keys and no whitespace so hashes are stable."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)


def record_hash(payload: Any) -> str:
    """SHA-256 of the canonical JSON form, first 16 hex digits."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()[:16]


def write_csv(path: Path, columns: dict, run_hash: str) -> Path:
    """
    Write a table as CSV with full double precision.

    The first line is a comment carrying the run hash so every file can be
    traced back to the inputs that produced it.

    Args:
        path: Output file
        columns: Mapping of column name to 1-D sequence
        run_hash: Hash of the deterministic part of the run record

    Returns:
        The path written
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(columns)
    with open(path, "w", newline="") as handle:
        handle.write(f"# run_hash: {run_hash}\n")
        frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_json(path: Path, payload: Any) -> Path:
    """Write a JSON document with indentation and sorted keys."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, default=_json_default)
        handle.write("\n")
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, (Path, datetime)):
        return str(value)
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def complex_record(z: complex) -> dict:
    """Split a complex number for JSON output."""
    z = complex(z)
    return {"re": z.real, "im": z.imag}
