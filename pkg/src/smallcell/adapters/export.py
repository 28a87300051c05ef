"""
Result files: per-drop CSV, aggregate CSV, analytic curves and the run manifest.

Floats are written with ``repr`` so a CSV is byte-identical for identical rows.
"""
import csv
import io
import json
from enum import Enum
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence

import aiofiles
import numpy as np
import structlog
from pydantic import BaseModel

from smallcell.core.models import AggregateRow, ResultRow

logger = structlog.get_logger(__name__)

RESULTS_CSV = "results.csv"
AGGREGATE_CSV = "aggregate.csv"
MANIFEST_JSON = "manifest.json"

# Packages whose versions are echoed in the manifest.
TRACKED_PACKAGES = ("smallcell", "numpy", "scipy", "networkx", "pydantic", "structlog")


def format_value(value: Any) -> str:
    """Text form of one CSV cell."""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render_csv(header: Sequence[str], records: Iterable[Sequence[Any]]) -> str:
    """CSV text with ``\\n`` line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for record in records:
        writer.writerow([format_value(v) for v in record])
    return buffer.getvalue()


def render_models(models: Sequence[BaseModel], header: List[str]) -> str:
    """CSV text of pydantic rows in field order."""
    return render_csv(header, ([getattr(m, name) for name in header] for m in models))


async def write_text(path: Path, text: str) -> Path:
    """Write ``text`` to ``path``, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    async with aiofiles.open(path, "w", encoding="utf-8", newline="") as f:
        await f.write(text)
    return path


async def write_results_csv(path: Path, rows: Sequence[ResultRow]) -> Path:
    """Per-drop results, sorted into the deterministic merge order."""
    ordered = sorted(rows, key=ResultRow.sort_key)
    await write_text(path, render_models(ordered, ResultRow.header()))
    logger.info("Results written", path=str(path), rows=len(ordered))
    return Path(path)


async def write_aggregate_csv(path: Path, rows: Sequence[AggregateRow]) -> Path:
    """Mean and standard error per sweep point."""
    await write_text(path, render_models(rows, AggregateRow.header()))
    logger.info("Aggregates written", path=str(path), points=len(rows))
    return Path(path)


async def write_curve_csv(path: Path, columns: Mapping[str, Sequence[float]]) -> Path:
    """Columns of equal length, e.g. a grid and its CDF values."""
    names = list(columns)
    lengths = {len(columns[name]) for name in names}
    if len(lengths) > 1:
        raise ValueError(f"curve columns differ in length: {sorted(lengths)}")
    records = zip(*(np.asarray(columns[name], dtype=float) for name in names))
    await write_text(path, render_csv(names, records))
    logger.info("Curve written", path=str(path), columns=names)
    return Path(path)


def package_versions() -> Dict[str, str]:
    """Installed versions of the tracked packages."""
    found: Dict[str, str] = {}
    for name in TRACKED_PACKAGES:
        try:
            found[name] = version(name)
        except PackageNotFoundError:
            found[name] = "unknown"
    return found


async def write_manifest(path: Path, manifest: Mapping[str, Any]) -> Path:
    """Run manifest as indented JSON, with package versions added."""
    payload = dict(manifest)
    payload.setdefault("versions", package_versions())
    await write_text(path, json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    logger.info("Manifest written", path=str(path))
    return Path(path)
