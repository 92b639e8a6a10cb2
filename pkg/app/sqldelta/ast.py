"""Immutable syntax tree of SQL_δ queries. Equality is structural."""

from dataclasses import dataclass
from typing import Optional, Union

from app.models.values import PlainValue


@dataclass(frozen=True)
class Literal:
    value: PlainValue


@dataclass(frozen=True)
class ColumnRef:
    name: str
    qualifier: Optional[str] = None

    def __str__(self) -> str:
        return f"{self.qualifier}.{self.name}" if self.qualifier else self.name


@dataclass(frozen=True)
class Star:
    qualifier: Optional[str] = None


Operand = Union[Literal, ColumnRef]


@dataclass(frozen=True)
class Comparison:
    op: str
    left: Operand
    right: Operand


@dataclass(frozen=True)
class BoolExpr:
    op: str
    items: tuple["Condition", ...]


Condition = Union[Comparison, BoolExpr]


@dataclass(frozen=True)
class SelectItem:
    expr: Union[Operand, Star]
    alias: Optional[str] = None


@dataclass(frozen=True)
class NodePattern:
    var: Optional[str] = None
    label: Optional[str] = None


@dataclass(frozen=True)
class EdgePattern:
    var: Optional[str] = None
    label: Optional[str] = None


@dataclass(frozen=True)
class PathPattern:
    nodes: tuple[NodePattern, ...]
    edges: tuple[EdgePattern, ...]


@dataclass(frozen=True)
class MatcherSpec:
    kind: str
    left: ColumnRef
    right: ColumnRef
    threshold: Optional[float] = None


@dataclass(frozen=True)
class TableRef:
    name: str
    alias: Optional[str] = None

    @property
    def binding(self) -> str:
        return self.alias or self.name


@dataclass(frozen=True)
class SubqueryRef:
    query: "Select"
    alias: str

    @property
    def binding(self) -> str:
        return self.alias


@dataclass(frozen=True)
class JoinRef:
    left: "FromItem"
    right: "FromItem"
    on: Condition


@dataclass(frozen=True)
class MapRef:
    left: "FromItem"
    right: "FromItem"
    matcher: Optional[MatcherSpec] = None


FromItem = Union[TableRef, SubqueryRef, JoinRef, MapRef]


@dataclass(frozen=True)
class Select:
    items: tuple[SelectItem, ...]
    source: Optional[FromItem] = None
    paths: tuple[PathPattern, ...] = ()
    where: Optional[Condition] = None

    @property
    def is_pattern(self) -> bool:
        return bool(self.paths)


def conjuncts(cond: Optional[Condition]) -> list[Condition]:
    """Top-level AND operands of a condition."""
    if cond is None:
        return []
    if isinstance(cond, BoolExpr) and cond.op == "and":
        out: list[Condition] = []
        for item in cond.items:
            out += conjuncts(item)
        return out
    return [cond]


def column_refs(cond: Condition) -> list[ColumnRef]:
    if isinstance(cond, Comparison):
        return [x for x in (cond.left, cond.right) if isinstance(x, ColumnRef)]
    out: list[ColumnRef] = []
    for item in cond.items:
        out += column_refs(item)
    return out
