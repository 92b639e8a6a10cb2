"""Main-memory cost model C_emm over annotated physical plans."""

from app.models.schemas import CostParams
from app.planner.physical import OpKind, PhysicalOp


def step_cost(op: PhysicalOp, params: CostParams) -> float:
    """
    Cost an operator adds on top of its inputs.

    Args:
        op (PhysicalOp): An operator with `est_card`, `ref_card` and `cond_cards` set,
            and its children annotated.
        params (CostParams): τ (scan vs join ratio) and κ (per-pair ER cost).

    Returns:
        float: The operator's own cost.
    """
    tau = params.tau
    kind = op.kind
    if kind is OpKind.SCAN:
        own = tau * op.est_card
        if op.subplan is not None:
            own += cost_emm(op.subplan, params)
        return own
    if kind in (OpKind.FILTER, OpKind.PROJECT):
        return 0.0
    conds = sum(tau * c for c in op.cond_cards)
    if kind is OpKind.HASH_JOIN:
        return op.est_card + conds
    if kind is OpKind.NL_JOIN:
        return op.child.est_card * op.right.est_card + conds
    if kind is OpKind.EXPLORE_NL:
        return tau * op.ref_card
    if kind is OpKind.EXPLORE_HASH:
        return tau * op.ref_card + op.est_card
    if kind is OpKind.IX_EXPLORE_NL:
        width = op.child.est_card
        if width <= 0:
            return 0.0
        return tau * op.ref_card * sum(0.5 * c / width for c in op.cond_cards)
    if kind is OpKind.IX_EXPLORE_HASH:
        return tau * op.ref_card + conds + op.est_card
    if kind is OpKind.DELTA_JOIN:
        return params.kappa * op.child.est_card * op.right.est_card
    raise ValueError(f"unknown operator {kind}")


def cost_emm(op: PhysicalOp, params: CostParams) -> float:
    """Recursive C_emm of the plan rooted at `op`."""
    return sum(cost_emm(c, params) for c in op.children()) + step_cost(op, params)


def annotate_costs(op: PhysicalOp, params: CostParams) -> float:
    """Fills `cum_cost` bottom-up and returns the root's."""
    op.cum_cost = sum(annotate_costs(c, params) for c in op.children()) + step_cost(op, params)
    return op.cum_cost
