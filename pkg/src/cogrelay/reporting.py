"""Rectangular result tables with provenance, written as CSV or JSON."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field


def config_hash(obj) -> str:
    """Short stable digest of a JSON-serialisable config description."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    provenance: str = ""

    def add(self, row) -> None:
        if isinstance(row, dict):
            missing = [c for c in self.columns if c not in row]
            if missing:
                raise ValueError(f"row lacks columns {missing}")
            row = [row[c] for c in self.columns]
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, table has {len(self.columns)} columns")
        self.rows.append(list(row))

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows(self.rows)
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"columns": self.columns, "rows": self.records(), "provenance": self.provenance}
        return json.dumps(doc, indent=2) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown output format {fmt!r}")

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        table = cls(header)
        for row in reader:
            table.add([_parse_cell(c) for c in row])
        return table

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        doc = json.loads(text)
        table = cls(doc["columns"], provenance=doc.get("provenance", ""))
        for rec in doc["rows"]:
            table.add(rec)
        return table


def _parse_cell(cell: str):
    for conv in (int, float):
        try:
            return conv(cell)
        except ValueError:
            pass
    return cell
