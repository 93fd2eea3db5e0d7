import hashlib
import logging
import os
import subprocess
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict

import orjson

from common.wqed import __version__

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Provenance:
    config_sha256: str
    version: str
    timestamp: str
    experiment: str

    def asObject(self) -> Dict[str, str]:
        return {
            "config_sha256": self.config_sha256,
            "version": self.version,
            "timestamp": self.timestamp,
            "experiment": self.experiment,
        }


def configHash(document: Dict[str, Any]) -> str:
    """sha256 of the canonical (sorted-key) JSON form of a resolved configuration."""
    return hashlib.sha256(orjson.dumps(document, option=orjson.OPT_SORT_KEYS)).hexdigest()


def versionString() -> str:
    try:
        completed = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"],
                                   cwd=Path(__file__).resolve().parent, capture_output=True, text=True,
                                   timeout=5, check=True)
        described = completed.stdout.strip()
        if described:
            return described
    except (OSError, subprocess.SubprocessError):
        logger.debug("git describe unavailable, using package version")
    return __version__


def timestamp() -> str:
    """UTC ISO-8601 time, pinned by SOURCE_DATE_EPOCH when it is set."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        moment = datetime.now(timezone.utc)
    return moment.replace(microsecond=0).isoformat()


def provenanceFor(document: Dict[str, Any], experiment: str) -> Provenance:
    return Provenance(config_sha256=configHash(document), version=versionString(),
                      timestamp=timestamp(), experiment=experiment)


def tablePath(base: str, table: str, extension: str) -> Path:
    """results/sweep + 'forward' -> results/sweep_forward.csv"""
    base_path = Path(base)
    stem = base_path.name[:-len(base_path.suffix)] if base_path.suffix in (".csv", ".json") else base_path.name
    return base_path.with_name(f"{stem}_{table}.{extension}")
