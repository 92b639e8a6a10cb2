"""Canonical SQL_δ text for a syntax tree. Reparsing the text gives back an equal tree."""

from app.sqldelta.ast import (
    Comparison,
    JoinRef,
    Literal,
    MapRef,
    PathPattern,
    Select,
    SelectItem,
    Star,
    SubqueryRef,
    TableRef,
)


def _literal(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _operand(op) -> str:
    if isinstance(op, Literal):
        return _literal(op.value)
    return str(op)


def print_condition(cond, nested: bool = False) -> str:
    if isinstance(cond, Comparison):
        return f"{_operand(cond.left)} {cond.op} {_operand(cond.right)}"
    text = f" {cond.op} ".join(print_condition(i, nested=True) for i in cond.items)
    return f"({text})" if nested else text


def _item(item: SelectItem) -> str:
    if isinstance(item.expr, Star):
        return f"{item.expr.qualifier}.*" if item.expr.qualifier else "*"
    text = _operand(item.expr)
    return f"{text} as {item.alias}" if item.alias else text


def _var(var, label) -> str:
    if label:
        return f"{var or ''}: {label}" if var else f": {label}"
    return var or ""


def _path(path: PathPattern) -> str:
    parts = [f"({_var(path.nodes[0].var, path.nodes[0].label)})"]
    for edge, node in zip(path.edges, path.nodes[1:]):
        if edge.var is None and edge.label is None:
            parts.append("->")
        else:
            parts.append(f"-[{_var(edge.var, edge.label)}]->")
        parts.append(f"({_var(node.var, node.label)})")
    return "".join(parts)


def _from(item) -> str:
    if isinstance(item, TableRef):
        return f"{item.name} as {item.alias}" if item.alias else item.name
    if isinstance(item, SubqueryRef):
        return f"({print_query(item.query)}) as {item.alias}"
    if isinstance(item, JoinRef):
        return f"{_from(item.left)} join {_from(item.right)} on {print_condition(item.on)}"
    if isinstance(item, MapRef):
        text = f"{_from(item.left)} map {_from(item.right)}"
        m = item.matcher
        if m is not None:
            sep = "=" if m.kind == "exact" else "~"
            tail = f", {m.threshold!r}" if m.threshold is not None else ""
            text += f" using {m.kind}({m.left} {sep} {m.right}{tail})"
        return text
    raise TypeError(f"not a from item: {item!r}")


def print_query(query: Select) -> str:
    text = "select " + ", ".join(_item(i) for i in query.items)
    if query.source is not None:
        text += " from " + _from(query.source)
    if query.paths:
        text += " match " + ", ".join(_path(p) for p in query.paths)
    if query.where is not None:
        text += " where " + print_condition(query.where)
    return text
