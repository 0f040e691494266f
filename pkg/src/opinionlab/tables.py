"""Plot-ready result tables: CSV with a JSON metadata comment line, or JSON {meta, rows}."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

META_PREFIX = "# meta: "


def render(meta: dict, columns: Sequence[str], rows: Sequence[dict], fmt: str = "csv") -> str:
    if fmt == "json":
        return json.dumps({"meta": meta, "rows": [dict(r) for r in rows]}, indent=1) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    buf.write(META_PREFIX + json.dumps(meta, sort_keys=True) + "\n")
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def parse(text: str) -> tuple[dict, list[dict]]:
    """Inverse of :func:`render`; CSV cells come back as strings."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        obj = json.loads(stripped)
        return obj["meta"], obj["rows"]
    lines = text.splitlines()
    if not lines or not lines[0].startswith(META_PREFIX):
        raise ValueError("missing metadata line")
    meta = json.loads(lines[0][len(META_PREFIX) :])
    rows = list(csv.DictReader(lines[1:]))
    return meta, rows


def read_table(path: str | Path) -> tuple[dict, list[dict]]:
    return parse(Path(path).read_text())
