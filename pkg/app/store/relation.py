"""Extended relations: schemas with ref-valued columns and a fixed-width row codec."""

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from app.core.exceptions import SchemaError
from app.models.values import Column, ColumnType, RefForm, RefValue

DELETED_BIT = 1 << 63
MAX_COLUMNS = 63

_PLAIN_DTYPES = {
    ColumnType.INT: "<i8",
    ColumnType.FLOAT: "<f8",
    ColumnType.STRING: "<u4",
    ColumnType.BOOL: "u1",
}
_FLAG_DIRECT = 1
_FLAG_SINGLE = 2


@dataclass(frozen=True)
class ExtendedSchema:
    name: str
    columns: tuple[Column, ...]

    def __post_init__(self):
        if len(self.columns) > MAX_COLUMNS:
            raise SchemaError(f"{self.name}: at most {MAX_COLUMNS} columns are supported")
        names = [c.name for c in self.columns]
        if len(names) != len(set(names)):
            raise SchemaError(f"{self.name}: duplicate column names")
        for c in self.columns:
            if c.is_ref and not c.ref_target:
                raise SchemaError(f"{self.name}.{c.name}: ref column needs a target relation")

    @property
    def arity(self) -> int:
        return len(self.columns)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise SchemaError(f"{self.name} has no column {name}")

    def ref_columns(self) -> list[tuple[int, Column]]:
        return [(i, c) for i, c in enumerate(self.columns) if c.is_ref]


class StringHeap:
    """Per-relation string dictionary; cells hold fixed-width u32 handles."""

    def __init__(self, values: Optional[list[str]] = None):
        self.values: list[str] = list(values or [])
        self._index = {v: i for i, v in enumerate(self.values)}

    def handle(self, value: str) -> int:
        h = self._index.get(value)
        if h is None:
            h = len(self.values)
            self.values.append(value)
            self._index[value] = h
        return h

    def lookup(self, handle: int) -> str:
        return self.values[handle]


class RowCodec:
    """
    Packs logical rows into numpy structured records.

    Layout: a u64 validity word (bit i = column i is non-null, bit 63 = tombstone),
    then one field per plain column, and three fields per ref column (unit, offset,
    flags).
    """

    def __init__(self, schema: ExtendedSchema, heap: StringHeap):
        self.schema = schema
        self.heap = heap
        fields = [("_valid", "<u8")]
        for c in schema.columns:
            if c.is_ref:
                fields += [(f"{c.name}#u", "<u8"), (f"{c.name}#o", "<u8"), (f"{c.name}#f", "u1")]
            else:
                fields.append((c.name, _PLAIN_DTYPES[c.type]))
        self.dtype = np.dtype(fields)
        self._all_valid = (1 << schema.arity) - 1

    @property
    def row_width(self) -> int:
        return self.dtype.itemsize

    def _raw(self, row: Sequence, deleted: bool = False) -> tuple:
        if len(row) != self.schema.arity:
            raise SchemaError(
                f"{self.schema.name}: expected {self.schema.arity} values, got {len(row)}"
            )
        valid = DELETED_BIT if deleted else 0
        out: list = [0]
        for i, (c, v) in enumerate(zip(self.schema.columns, row)):
            if v is None:
                out += [0, 0, 0] if c.is_ref else [0]
                continue
            valid |= 1 << i
            kind = c.type
            if kind is ColumnType.REF:
                if not isinstance(v, RefValue):
                    raise SchemaError(f"{self.schema.name}.{c.name}: expected a reference")
                flags = (_FLAG_DIRECT if v.form is RefForm.DIRECT else 0) | (
                    _FLAG_SINGLE if v.single else 0
                )
                out += [v.unit, v.offset, flags]
            elif kind is ColumnType.STRING:
                out.append(self.heap.handle(str(v)))
            elif kind is ColumnType.INT:
                if isinstance(v, bool) or not isinstance(v, int):
                    raise SchemaError(f"{self.schema.name}.{c.name}: expected int, got {v!r}")
                out.append(v)
            elif kind is ColumnType.FLOAT:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise SchemaError(f"{self.schema.name}.{c.name}: expected float, got {v!r}")
                out.append(float(v))
            else:
                if not isinstance(v, bool):
                    raise SchemaError(f"{self.schema.name}.{c.name}: expected bool, got {v!r}")
                out.append(int(v))
        out[0] = valid
        return tuple(out)

    def encode(self, rows: Iterable[Sequence]) -> bytes:
        raw = [self._raw(r) for r in rows]
        if not raw:
            return b""
        return np.array(raw, dtype=self.dtype).tobytes()

    def encode_deleted(self, row: Sequence) -> bytes:
        return np.array([self._raw(row, deleted=True)], dtype=self.dtype).tobytes()

    def decode(self, data: bytes) -> list[Optional[tuple]]:
        """Decodes rows positionally; tombstoned rows come back as None."""
        if not data:
            return []
        raw_rows = np.frombuffer(data, dtype=self.dtype).tolist()
        columns = self.schema.columns
        targets = [c.ref_target for c in columns]
        heap = self.heap.values
        out: list[Optional[tuple]] = []
        for raw in raw_rows:
            valid = raw[0]
            if valid & DELETED_BIT:
                out.append(None)
                continue
            values = []
            pos = 1
            for i, c in enumerate(columns):
                kind = c.type
                if kind is ColumnType.REF:
                    if valid >> i & 1:
                        flags = raw[pos + 2]
                        values.append(
                            RefValue(
                                RefForm.DIRECT if flags & _FLAG_DIRECT else RefForm.INDIRECT,
                                raw[pos],
                                raw[pos + 1],
                                bool(flags & _FLAG_SINGLE),
                                targets[i],
                            )
                        )
                    else:
                        values.append(None)
                    pos += 3
                    continue
                if not valid >> i & 1:
                    values.append(None)
                elif kind is ColumnType.STRING:
                    values.append(heap[raw[pos]])
                elif kind is ColumnType.BOOL:
                    values.append(bool(raw[pos]))
                else:
                    values.append(raw[pos])
                pos += 1
            out.append(tuple(values))
        return out


class ExtendedRelation:
    def __init__(self, schema: ExtendedSchema, heap: Optional[StringHeap] = None):
        self.schema = schema
        self.heap = heap or StringHeap()
        self.codec = RowCodec(schema, self.heap)
        self.fragment_ids: list[int] = []

    @property
    def name(self) -> str:
        return self.schema.name

    @property
    def row_width(self) -> int:
        return self.codec.row_width

    def __repr__(self) -> str:
        cols = ", ".join(
            f"{c.name}->{c.ref_target}" if c.is_ref else f"{c.name}:{c.type.value}"
            for c in self.schema.columns
        )
        return f"{self.name}({cols})"
