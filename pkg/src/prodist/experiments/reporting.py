"""
Versioned tabular output for sweeps and probes.

CSV files open with a ``# prodist-schema: <kind>/v1`` line, then one ``# key: value``
line per metadata entry, then the header and the rows. JSON output carries the
same three parts under ``schema``, ``meta`` and ``rows``.
"""

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field

from prodist.core.numeric import render

SCHEMA_VERSION = "v1"


class SweepTable(BaseModel):
    """Rows in n-ascending order plus run metadata."""

    kind: str
    columns: List[str]
    rows: List[Dict[str, Any]] = Field(default_factory=list)
    meta: Dict[str, Any] = Field(default_factory=dict)

    @property
    def schema_tag(self) -> str:
        return f"{self.kind}/{SCHEMA_VERSION}"

    def column(self, name: str) -> List[Any]:
        return [row.get(name) for row in self.rows]

    def add(self, **values: Any) -> None:
        unknown = set(values) - set(self.columns)
        if unknown:
            raise KeyError(f"Unknown column(s) for {self.kind}: {sorted(unknown)}")
        self.rows.append({c: values.get(c) for c in self.columns})


def _cell(value: Any) -> str:
    if value is None:
        return ""
    value = render(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_csv(table: SweepTable) -> str:
    buffer = io.StringIO()
    buffer.write(f"# prodist-schema: {table.schema_tag}\n")
    for key, value in table.meta.items():
        buffer.write(f"# {key}: {_cell(value)}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_cell(row.get(c)) for c in table.columns])
    return buffer.getvalue()


def to_json(table: SweepTable) -> str:
    payload = {
        "schema": table.schema_tag,
        "meta": {k: render(v) for k, v in table.meta.items()},
        "rows": [{k: render(v) for k, v in row.items()} for row in table.rows],
    }
    return json.dumps(payload, indent=2, default=render)


def render_table(table: SweepTable, fmt: str = "csv") -> str:
    if fmt == "csv":
        return to_csv(table)
    if fmt == "json":
        return to_json(table)
    raise ValueError(f"Unknown output format '{fmt}' (expected csv or json)")


def write_table(table: SweepTable, path: Union[str, Path], fmt: Optional[str] = None) -> Path:
    """Write to ``path``; the format defaults to the file suffix."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_table(table, fmt), encoding="utf-8")
    return path


def read_csv_schema(text: str) -> Optional[str]:
    """The schema tag of a CSV produced by ``to_csv``, if present."""
    first = text.splitlines()[0] if text else ""
    prefix = "# prodist-schema: "
    return first[len(prefix):] if first.startswith(prefix) else None
