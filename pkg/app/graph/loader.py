"""CSV and delta-file loaders."""

import csv
import logging
import re
import shlex
from pathlib import Path
from typing import Any, Optional

from app.core.exceptions import ConversionError, NotFound
from app.models.schemas import EdgeRecord, GraphDelta, PropertyGraph, VertexRecord

logger = logging.getLogger(__name__)

_INT = re.compile(r"^[+-]?\d+$")
_FLOAT = re.compile(r"^[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?$")


def parse_cell(text: str) -> Any:
    """Empty -> null, then int, float, true/false, else the string itself."""
    if text == "":
        return None
    if _INT.match(text):
        return int(text)
    if _FLOAT.match(text):
        return float(text)
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    return text


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    file = Path(path)
    if not file.exists():
        raise NotFound(f"no such file: {path}")
    with file.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f, escapechar="\\", doublequote=True)
        rows = [r for r in reader if r]
    if not rows:
        raise ConversionError(f"{path}: missing header")
    header = [h.strip() for h in rows[0]]
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ConversionError(f"{path}:{n}: expected {len(header)} fields, got {len(row)}")
    return header, rows[1:]


def _id(text: str, where: str) -> int:
    value = parse_cell(text.strip())
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise ConversionError(f"{where}: {text!r} is not a non-negative integer id")
    return value


def _attrs(names: list[str], cells: list[str]) -> dict[str, Any]:
    out = {}
    for name, cell in zip(names, cells):
        value = parse_cell(cell)
        if value is not None:
            out[name] = value
    return out


def load_graph_csv(vertices_path: str | Path, edges_path: str | Path) -> PropertyGraph:
    """
    Reads `vid,label,<attr...>` and `eid,src,dst,label,<attr...>` files.

    Raises:
        NotFound: If a file is missing.
        ConversionError: On malformed headers, rows or ids.
    """
    header, rows = read_csv(vertices_path)
    if header[:2] != ["vid", "label"]:
        raise ConversionError(f"{vertices_path}: header must start with vid,label")
    vertices = [
        VertexRecord(vid=_id(r[0], str(vertices_path)), label=r[1], attrs=_attrs(header[2:], r[2:]))
        for r in rows
    ]
    header, rows = read_csv(edges_path)
    if header[:4] != ["eid", "src", "dst", "label"]:
        raise ConversionError(f"{edges_path}: header must start with eid,src,dst,label")
    edges = [
        EdgeRecord(
            eid=_id(r[0], str(edges_path)),
            src=_id(r[1], str(edges_path)),
            dst=_id(r[2], str(edges_path)),
            label=r[3],
            attrs=_attrs(header[4:], r[4:]),
        )
        for r in rows
    ]
    logger.info(f"📦 Read {len(vertices)} vertices and {len(edges)} edges")
    return PropertyGraph(vertices=vertices, edges=edges)


def load_table_csv(path: str | Path) -> tuple[list[str], list[tuple]]:
    header, rows = read_csv(path)
    if len(set(header)) != len(header):
        raise ConversionError(f"{path}: duplicate column names")
    return header, [tuple(parse_cell(c) for c in r) for r in rows]


def _kv(tokens: list[str], where: str) -> dict[str, Any]:
    out = {}
    for token in tokens:
        if "=" not in token:
            raise ConversionError(f"{where}: expected key=value, got {token!r}")
        key, _, value = token.partition("=")
        parsed = parse_cell(value)
        if parsed is not None:
            out[key] = parsed
    return out


def parse_delta(text: str, source: Optional[str] = None) -> GraphDelta:
    """
    Parses delta lines: `+V vid label k=v ...`, `-V vid`, `+E eid src dst label k=v ...`,
    `-E eid`. Blank lines and `#` comments are skipped; values may be quoted.
    """
    delta = GraphDelta()
    source = source or "delta"
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        where = f"{source}:{n}"
        try:
            tokens = shlex.split(line)
        except ValueError as e:
            raise ConversionError(f"{where}: {e}") from e
        op, args = tokens[0], tokens[1:]
        if op == "+V" and len(args) >= 2:
            delta.add_vertices.append(
                VertexRecord(vid=_id(args[0], where), label=args[1], attrs=_kv(args[2:], where))
            )
        elif op == "-V" and len(args) == 1:
            delta.del_vertices.append(_id(args[0], where))
        elif op == "+E" and len(args) >= 4:
            delta.add_edges.append(
                EdgeRecord(
                    eid=_id(args[0], where),
                    src=_id(args[1], where),
                    dst=_id(args[2], where),
                    label=args[3],
                    attrs=_kv(args[4:], where),
                )
            )
        elif op == "-E" and len(args) == 1:
            delta.del_edges.append(_id(args[0], where))
        else:
            raise ConversionError(f"{where}: cannot parse {line!r}")
    return delta


def load_delta(path: str | Path) -> GraphDelta:
    file = Path(path)
    if not file.exists():
        raise NotFound(f"no such file: {path}")
    return parse_delta(file.read_text(encoding="utf-8"), str(path))
