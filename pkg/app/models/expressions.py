"""
Bound expressions. Columns are addressed by query-graph node name and attribute; the
executor compiles them against a row layout.
"""

from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

from app.models.values import PlainValue

EDGE_PREFIX = "E."


@dataclass(frozen=True)
class Col:
    """
    A column of a node. `deref` names a column of the tuple that the single-tuple ref
    stored in `attr` designates (`O.e.dst_L` dereferenced to the target's `vid`).
    Nodes named `E.<var>` stand for an edge variable and resolve to whichever of its
    two edge nodes a plan keeps.
    """

    node: str
    attr: str
    deref: Optional[str] = None

    def __str__(self) -> str:
        text = f"{self.node}.{self.attr}"
        return f"{text}->{self.deref}" if self.deref else text


@dataclass(frozen=True)
class Const:
    value: PlainValue

    def __str__(self) -> str:
        if self.value is None:
            return "null"
        if isinstance(self.value, bool):
            return "true" if self.value else "false"
        if isinstance(self.value, str):
            return "'" + self.value.replace("'", "''") + "'"
        return repr(self.value)


Scalar = Union[Col, Const]


@dataclass(frozen=True)
class Cmp:
    op: str
    left: Scalar
    right: Scalar

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class BoolOp:
    op: str
    items: tuple["Expr", ...]

    def __str__(self) -> str:
        if not self.items:
            return "true" if self.op == "and" else "false"
        return "(" + f" {self.op} ".join(str(i) for i in self.items) + ")"


TRUE = BoolOp("and", ())


@dataclass(frozen=True)
class ExpCond:
    """
    Explorative condition: some tuple t'' of the fragment designated by `source` has
    t''[field] equal to `probe`. `helper` is the edge node the condition stands in for;
    its filters restrict t''.
    """

    source: Col
    field: str
    probe: Col
    helper: str

    def __str__(self) -> str:
        return f"ψ({self.source})[{self.field}] ∋ {self.probe}"


Expr = Union[Cmp, BoolOp, Col, Const]


def nodes_of(expr) -> set[str]:
    if isinstance(expr, Col):
        return {expr.node}
    if isinstance(expr, Const):
        return set()
    if isinstance(expr, Cmp):
        return nodes_of(expr.left) | nodes_of(expr.right)
    if isinstance(expr, ExpCond):
        return {expr.source.node, expr.probe.node}
    out: set[str] = set()
    for item in expr.items:
        out |= nodes_of(item)
    return out


def rename_nodes(expr, mapping: Callable[[str], str]):
    """Copy of `expr` with every node name passed through `mapping`."""
    if isinstance(expr, Col):
        return replace(expr, node=mapping(expr.node))
    if isinstance(expr, Const):
        return expr
    if isinstance(expr, Cmp):
        return Cmp(expr.op, rename_nodes(expr.left, mapping), rename_nodes(expr.right, mapping))
    if isinstance(expr, ExpCond):
        return replace(
            expr,
            source=rename_nodes(expr.source, mapping),
            probe=rename_nodes(expr.probe, mapping),
        )
    return BoolOp(expr.op, tuple(rename_nodes(i, mapping) for i in expr.items))


def is_equi(expr) -> bool:
    return (
        isinstance(expr, Cmp)
        and expr.op == "="
        and isinstance(expr.left, Col)
        and isinstance(expr.right, Col)
        and expr.left.node != expr.right.node
    )


def edge_var(node: str) -> Optional[str]:
    return node[len(EDGE_PREFIX):] if node.startswith(EDGE_PREFIX) else None
