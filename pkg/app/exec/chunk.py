"""
Column-major row chunks and row layouts.

A row is the concatenation of one tuple per visible node, in the plan's visible
order; a layout maps (node, column) to a position in that row.
"""

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from app.core.exceptions import ExecError
from app.models.expressions import edge_var
from app.sqldelta.logical import QNode


@dataclass
class Chunk:
    columns: list[list] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.columns[0]) if self.columns else 0

    @classmethod
    def from_rows(cls, rows: list[tuple], width: int) -> "Chunk":
        if not rows:
            return cls([[] for _ in range(width)])
        return cls([list(c) for c in zip(*rows)])

    def rows(self) -> Iterator[tuple]:
        return zip(*self.columns)


def chunked(rows: Iterable[tuple], size: int, width: int) -> Iterator[Chunk]:
    """Groups rows into chunks of at most `size` rows; no chunk is empty."""
    batch: list[tuple] = []
    for row in rows:
        batch.append(row)
        if len(batch) >= size:
            yield Chunk.from_rows(batch, width)
            batch = []
    if batch:
        yield Chunk.from_rows(batch, width)


def rows_of(chunks: Iterable[Chunk]) -> Iterator[tuple]:
    for chunk in chunks:
        yield from chunk.rows()


class Layout:
    def __init__(self, nodes: dict[str, QNode], visible: Iterable[str]):
        self.nodes = nodes
        self.visible = tuple(visible)
        self.offsets: dict[str, int] = {}
        pos = 0
        for name in self.visible:
            self.offsets[name] = pos
            pos += len(nodes[name].columns)
        self.width = pos

    def node_of(self, name: str) -> str:
        """The visible node standing for `name` (edge variables map to either edge node)."""
        if name in self.offsets:
            return name
        var = edge_var(name)
        if var is not None:
            for prefix in ("O.", "I."):
                if prefix + var in self.offsets:
                    return prefix + var
        raise ExecError(f"columns of {name} are not available at this point of the plan")

    def index(self, name: str, column: str) -> Optional[int]:
        node = self.node_of(name)
        columns = self.nodes[node].columns
        if column not in columns:
            return None
        return self.offsets[node] + columns.index(column)
