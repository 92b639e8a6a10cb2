"""Result rendering for the shell: csv, tsv or an aligned text table."""

import csv
import io
from typing import Any, Iterable, Sequence

from app.core.exceptions import ConfigError

FORMATS = ("csv", "tsv", "table")


def render_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return "[" + " ".join(render_value(v) for v in value) + "]"
    return str(value)


def format_rows(columns: Sequence[str], rows: Iterable[Sequence], fmt: str = "csv") -> str:
    """
    Renders a header line plus one line per row.

    Raises:
        ConfigError: If `fmt` is not one of csv, tsv or table.
    """
    if fmt not in FORMATS:
        raise ConfigError(f"unknown output format {fmt}; expected one of {', '.join(FORMATS)}")
    cells = [[render_value(v) for v in row] for row in rows]
    if fmt == "table":
        widths = [len(c) for c in columns]
        for row in cells:
            widths = [max(w, len(v)) for w, v in zip(widths, row)]
        lines = [" | ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
        lines.append("-+-".join("-" * w for w in widths))
        lines += [" | ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
        return "\n".join(lines)
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter="," if fmt == "csv" else "\t", lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(cells)
    return buffer.getvalue().rstrip("\n")
