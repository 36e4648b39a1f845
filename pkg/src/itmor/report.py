"""Machine-readable reports: named numeric tables plus a metadata block.

Reports are deterministic: identical inputs produce byte-identical output.
Numbers are serialized with 17 significant digits so round-tripping through
text preserves IEEE-754 doubles exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

__all__ = ["Table", "Report", "render_csv", "render_json", "format_number"]


def format_number(x: float) -> str:
    return "%.17g" % float(x)


@dataclass(frozen=True)
class Table:
    """A rectangular block of numbers with one name per column."""

    columns: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        cols = tuple(str(c) for c in self.columns)
        rows = tuple(tuple(float(v) for v in r) for r in self.rows)
        for r in rows:
            if len(r) != len(cols):
                raise ValueError(
                    f"row of width {len(r)} in a table with {len(cols)} columns"
                )
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "rows", rows)


@dataclass
class Report:
    metadata: dict[str, str] = field(default_factory=dict)
    tables: dict[str, Table] = field(default_factory=dict)

    def add_table(self, name: str, columns, rows) -> None:
        self.tables[name] = Table(tuple(columns), tuple(tuple(r) for r in rows))


def render_csv(report: Report) -> str:
    lines = ["# itmor-report v1"]
    for key, value in report.metadata.items():
        lines.append(f"# {key}={value}")
    for name, table in report.tables.items():
        lines.append("")
        lines.append(f"# table={name}")
        lines.append(",".join(table.columns))
        for row in table.rows:
            lines.append(",".join(format_number(v) for v in row))
    return "\n".join(lines) + "\n"


def render_json(report: Report) -> str:
    doc = {
        "metadata": dict(report.metadata),
        "tables": {
            name: {"columns": list(t.columns), "rows": [list(r) for r in t.rows]}
            for name, t in report.tables.items()
        },
    }
    return json.dumps(doc, indent=2) + "\n"
