from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, NamedTuple, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

ReportFormat = Literal["csv", "json", "both"]


class Table(NamedTuple):
    columns: List[str]
    rows: List[Dict[str, Any]]


class ReportMeta(NamedTuple):
    scenario_hash: str
    root_seed: int


def table(columns: Iterable[str], rows: Iterable[Dict[str, Any]]) -> Table:
    cols = list(columns)
    return Table(cols, [{c: row.get(c) for c in cols} for row in rows])


def _plain(value: Any) -> Any:
    return value.item() if isinstance(value, np.generic) else value


def _cell(value: Any) -> str:
    value = _plain(value)
    if value is None:
        return ""
    if isinstance(value, float) and not math.isfinite(value):
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _json_safe(value: Any) -> Any:
    """Non-finite floats become null; JSON has no inf or nan."""
    value = _plain(value)
    if isinstance(value, float):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def header_lines(meta: ReportMeta) -> List[str]:
    return [f"# scenario_hash: {meta.scenario_hash}", f"# root_seed: {meta.root_seed}"]


def write_csv(path: Path, data: Table, meta: ReportMeta) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        for line in header_lines(meta):
            f.write(line + "\n")
        writer = csv.DictWriter(f, fieldnames=data.columns)
        writer.writeheader()
        for r in data.rows:
            writer.writerow({k: _cell(r.get(k)) for k in data.columns})


def write_json(path: Path, data: Table, meta: ReportMeta) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "scenario_hash": meta.scenario_hash,
        "root_seed": meta.root_seed,
        "columns": data.columns,
        "rows": _json_safe(data.rows),
    }
    with path.open("w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2)
        f.write("\n")


def write_summary(path: Path, summary: Dict[str, Any], meta: ReportMeta) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"scenario_hash": meta.scenario_hash, "root_seed": meta.root_seed, "stages": _json_safe(summary)}
    with path.open("w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")


def emit_report(
    results: Dict[str, Table],
    out_dir: Path,
    fmt: ReportFormat,
    meta: ReportMeta,
    summary: Optional[Dict[str, Any]] = None,
) -> List[Path]:
    """Write one file per table (and format) plus ``summary.json``."""
    written: List[Path] = []
    for name in sorted(results):
        if fmt in ("csv", "both"):
            path = out_dir / f"{name}.csv"
            write_csv(path, results[name], meta)
            written.append(path)
        if fmt in ("json", "both"):
            path = out_dir / f"{name}.json"
            write_json(path, results[name], meta)
            written.append(path)
    if summary is not None:
        path = out_dir / "summary.json"
        write_summary(path, summary, meta)
        written.append(path)
    for path in written:
        logger.info("wrote %s", path)
    return written


def _parse(text: str) -> Any:
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            continue
    return text


def read_csv(path: Path) -> Tuple[ReportMeta, Table]:
    """Inverse of :func:`write_csv`: (meta, table) with numbers parsed back."""
    meta: Dict[str, str] = {}
    with path.open("r", encoding="utf-8", newline="") as f:
        lines = f.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# ") and not body:
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        else:
            body.append(line)
    reader = csv.DictReader(body)
    rows = [{k: _parse(v) for k, v in row.items()} for row in reader]
    parsed = ReportMeta(meta.get("scenario_hash", ""), int(meta.get("root_seed", "0")))
    return parsed, Table(list(reader.fieldnames or []), rows)


def finite_or_none(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None
