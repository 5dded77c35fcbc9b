from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

try:
    # Optional; do not fail if not installed
    from dotenv import load_dotenv  # type: ignore

    load_dotenv()
except Exception:
    pass


DEFAULT_OUTPUT_DIR = "results"


@dataclass(frozen=True)
class EnvSettings:
    output_dir: Path
    log_level: str
    workers: int


def _positive_int(value: Optional[str], default: int) -> int:
    if not value:
        return default
    try:
        parsed = int(value.strip())
    except ValueError:
        return default
    return parsed if parsed > 0 else default


def get_env_settings() -> EnvSettings:
    return EnvSettings(
        output_dir=Path(os.getenv("QFC_OUTPUT_DIR") or DEFAULT_OUTPUT_DIR),
        log_level=(os.getenv("QFC_LOG_LEVEL") or "INFO").strip().upper(),
        workers=_positive_int(os.getenv("QFC_WORKERS"), 1),
    )
