from app.planner.physical import EXPLORE_KINDS, JOIN_KINDS, OpKind, PhysicalOp, PhysicalPlan


def _conds(op: PhysicalOp) -> str:
    parts = [str(c) for c in op.conds] + [str(c) for c in op.exp_conds]
    return " and ".join(parts)


def describe(op: PhysicalOp, plan: PhysicalPlan) -> str:
    kind = op.kind
    if kind is OpKind.SCAN:
        node = plan.graph.nodes.get(op.node)
        text = f"Scan {op.node}"
        if node is not None and node.relation:
            text += f" ({node.relation})"
        if op.conds:
            text += f" filter={' and '.join(str(c) for c in op.conds)}"
        return text
    if kind in EXPLORE_KINDS:
        text = f"{kind.value} {op.source}.{op.attr} -> {op.node}"
        conds = _conds(op)
        if conds:
            text += f" [{conds}]"
        if op.consumed:
            text += f" consumes {', '.join(op.consumed)}"
        return text
    if kind in JOIN_KINDS:
        text = f"{kind.value} {_conds(op) or 'true'}"
        if op.consumed:
            text += f" consumes {', '.join(op.consumed)}"
        return text
    if kind is OpKind.FILTER:
        return f"Filter {' and '.join(str(c) for c in op.conds)}"
    if kind is OpKind.PROJECT:
        return f"Project [{', '.join(o.name for o in op.outputs)}]"
    m = op.matcher
    return f"DeltaJoin {m.kind}({m.left}, {m.right})"


def explain(plan: PhysicalPlan) -> str:
    """Indented operator tree, one line per operator with its estimates."""
    lines: list[str] = []

    def emit(op: PhysicalOp, current: PhysicalPlan, depth: int):
        pad = "  " * depth
        lines.append(f"{pad}{describe(op, current)} est_card={op.est_card:.1f} cum_cost={op.cum_cost:.1f}")
        if op.kind is OpKind.DELTA_JOIN:
            for side in op.sides:
                emit(side.root, side, depth + 1)
            return
        if op.subplan is not None:
            emit(op.subplan, current, depth + 1)
        for child in op.children():
            emit(child, current, depth + 1)

    emit(plan.root, plan, 0)
    return "\n".join(lines)
