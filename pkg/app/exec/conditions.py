import operator
from typing import Callable, Iterable

from app.core.exceptions import ExecError
from app.exec.chunk import Layout
from app.graph.rg import RgGraphStore
from app.models.expressions import BoolOp, Cmp, Col, Const, ExpCond
from app.models.values import RefValue
from app.sqldelta.logical import NodeKind
from app.store.store import RgStore

Getter = Callable[[tuple], object]
Predicate = Callable[[tuple], bool]

_OPS = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


def _always(row: tuple) -> bool:
    return True


class Compiler:
    """Compiles bound expressions into row accessors for one layout."""

    def __init__(self, layout: Layout, store: RgStore, graphs: dict[str, RgGraphStore]):
        self.layout = layout
        self.store = store
        self.graphs = graphs

    def column(self, col: Col) -> Getter:
        layout = self.layout
        name = layout.node_of(col.node)
        node = layout.nodes[name]
        index = layout.index(name, col.attr)
        if index is None:
            if node.graph is None:
                raise ExecError(f"unknown column {col}")
            kind = "V" if node.kind is NodeKind.VERTEX else "E"
            get_attr = self.graphs[node.graph].attr_getter(kind, col.attr)
            key = layout.offsets[name]

            def value(row: tuple):
                return get_attr(row[key])

            return value
        if col.deref is None:
            return operator.itemgetter(index)
        resolve = self.store.resolve
        schema = self.store.relation(node.relation).schema
        target = self.store.relation(schema.columns[schema.index(col.attr)].ref_target).schema
        at = target.index(col.deref)

        def deref(row: tuple):
            ref = row[index]
            if not isinstance(ref, RefValue):
                raise ExecError(f"{col} does not hold a reference")
            return resolve(ref)[0][at]

        return deref

    def scalar(self, expr) -> Getter:
        if isinstance(expr, Const):
            value = expr.value
            return lambda row: value
        if isinstance(expr, Col):
            return self.column(expr)
        raise ExecError(f"unsupported scalar {expr}")

    def predicate(self, expr) -> Predicate:
        if isinstance(expr, Cmp):
            fn = _OPS[expr.op]
            left, right = self.scalar(expr.left), self.scalar(expr.right)
            text = str(expr)

            def compare(row: tuple) -> bool:
                a, b = left(row), right(row)
                if a is None or b is None:
                    return False
                try:
                    return fn(a, b)
                except TypeError as e:
                    raise ExecError(f"type mismatch in {text}: {a!r} vs {b!r}") from e

            return compare
        if isinstance(expr, BoolOp):
            parts = [self.predicate(i) for i in expr.items]
            if expr.op == "and":
                return lambda row: all(p(row) for p in parts)
            return lambda row: any(p(row) for p in parts)
        raise ExecError(f"unsupported condition {expr}")

    def conjunction(self, exprs: Iterable) -> Predicate:
        parts = [self.predicate(e) for e in exprs]
        if not parts:
            return _always
        if len(parts) == 1:
            return parts[0]
        return lambda row: all(p(row) for p in parts)


def helper_filter(cond: ExpCond, layout_nodes: dict, store: RgStore, graphs: dict[str, RgGraphStore]) -> Predicate:
    """Filters of the helper node, compiled against the helper's own tuple."""
    helper = layout_nodes[cond.helper]
    return Compiler(Layout(layout_nodes, (cond.helper,)), store, graphs).conjunction(helper.filters)
