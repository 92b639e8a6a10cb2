"""
Plan search over the extended query graph.

Plans are left-deep: a state is the set of visible nodes (whose columns the rows carry)
plus the set of consumed nodes (checked through explorative conditions only). A state
grows by one neighbouring node per step. The candidate steps of a visible set come from
the CSG-CMP pairs the pair enumerator yields with a single-node side; each step must form
a legal pair with the state, and resolves to an exploration into the node or a value join
with its scan.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Optional

from pydantic import BaseModel

from app.core.exceptions import PlanError
from app.graph.stats import GraphStats
from app.models.expressions import BoolOp, ExpCond, is_equi
from app.models.schemas import CostParams
from app.planner.cost import annotate_costs, step_cost
from app.planner.enumerate import enumerate_mask_pairs
from app.planner.estimate import Estimator, StatsOverride, delta_join_card
from app.planner.legality import is_legal_mask
from app.planner.physical import OpKind, PhysicalOp, PhysicalPlan
from app.planner.querygraph import QueryGraph, add_candidates, build_query_graph
from app.planner.resolve import ResolvedOp, resolve_op
from app.sqldelta.logical import Catalog, LogicalPlan, NodeKind

logger = logging.getLogger(__name__)

HASHABLE_ATTRS = ("out_L", "in_L")


class PlannerOptions(BaseModel):
    hash_ops: bool = True
    intersective: bool = True
    optimizer: bool = True
    candidates: bool = False


@dataclass
class State:
    op: PhysicalOp
    vis: int
    cons: int = 0


def _is_true(cond) -> bool:
    return isinstance(cond, BoolOp) and cond.op == "and" and not cond.items


def _keys_between(conds, inner: str) -> bool:
    """Whether some equality ties the new node to the input."""
    for c in conds:
        if is_equi(c) and inner in (c.left.node, c.right.node):
            return True
    return False


class PlanSearch:
    """Builds, costs and searches left-deep physical plans over one query graph."""

    def __init__(
        self,
        q: QueryGraph,
        estimator: Estimator,
        params: CostParams,
        options: Optional[PlannerOptions] = None,
        derived: Optional[dict[str, PhysicalOp]] = None,
    ):
        self.q = q
        self.est = estimator
        self.params = params
        self.options = options or PlannerOptions()
        self.derived = derived or {}
        self.link_masks = [q.bit[ln.out_node] | q.bit[ln.in_node] for ln in q.links]
        self.pinned_masks = [q.bit[ln.out_node] | q.bit[ln.in_node] for ln in q.links if ln.pinned]

    # -----------------------
    # steps
    # -----------------------

    def scan(self, name: str) -> PhysicalOp:
        node = self.q.nodes[name]
        op = PhysicalOp(
            OpKind.SCAN,
            node=name,
            conds=tuple(node.filters),
            visible=(name,),
            est_card=self.est.base(name),
            subplan=self.derived.get(name),
        )
        op.cum_cost = step_cost(op, self.params)
        return op

    def base_states(self) -> list[State]:
        return [State(self.scan(n), self.q.bit[n]) for n in self.q.names if not self.q.nodes[n].is_edge]

    def _far_checked(self, name: str, vis: int) -> bool:
        """An edge node whose far vertex is visible must be tied to it by a condition."""
        q = self.q
        if not q.bit[q.far_vertex(name)] & vis:
            return True
        for e in q.value_at[name]:
            other = e.dst if e.src == name else e.src
            if (e.closure or e.same_pointer) and q.bit[other] & vis:
                return True
        return False

    def extend(self, state: State, name: str) -> Optional[State]:
        """
        The cheapest operator adding `name` to the state, or None when the step is not
        allowed: the node (or its duplicate) is already placed, the pair is illegal, an
        exploration would start from the new node, or an edge node would enter by a join.
        """
        q = self.q
        vis, cons = state.vis, state.cons
        bit = q.bit[name]
        placed = vis | cons
        if bit & placed:
            return None
        partner = q.dup.get(name)
        if partner is not None and q.bit[partner] & placed:
            return None
        if not is_legal_mask(q, vis, bit):
            return None
        resolved = resolve_op(q, vis, bit, cons, self.options.intersective)
        node = q.nodes[name]
        if resolved.is_explore:
            edge = resolved.explore
            if edge.dst != name or not q.bit[edge.src] & vis:
                return None
        elif node.is_edge:
            return None
        if node.is_edge and not self._far_checked(name, vis):
            return None
        if resolved.is_explore:
            op = self._explore(state.op, name, resolved)
        else:
            op = self._join(state.op, name, vis, resolved)
        return State(op, vis | bit, cons | resolved.consumed)

    def _pick(self, candidates: list[PhysicalOp]) -> PhysicalOp:
        best = None
        for op in candidates:
            op.cum_cost = sum(c.cum_cost for c in op.children()) + step_cost(op, self.params)
            if best is None or op.cum_cost < best.cum_cost:
                best = op
        return best

    def _explore(self, left: PhysicalOp, name: str, resolved: ResolvedOp) -> PhysicalOp:
        est = self.est
        edge = resolved.explore
        conds = tuple(c for c in resolved.conds if not _is_true(c))
        exp_conds = tuple(resolved.exp_conds)
        visible = left.visible + (name,)
        card = est.explore(list(visible), left.est_card, edge.src, edge.attr, name, conds, exp_conds)
        ref_card = left.est_card * est.degree(edge.src, edge.attr)
        cond_cards = tuple(left.est_card * est.degree(c.source.node, c.source.attr) for c in exp_conds)
        hashable = (
            self.options.hash_ops and len(left.visible) >= 2 and edge.attr in HASHABLE_ATTRS
        )
        if exp_conds:
            kinds = [OpKind.IX_EXPLORE_NL] + ([OpKind.IX_EXPLORE_HASH] if hashable else [])
        else:
            use_hash = hashable and _keys_between(conds, name)
            kinds = [OpKind.EXPLORE_NL] + ([OpKind.EXPLORE_HASH] if use_hash else [])
        consumed = tuple(self.q.members(resolved.consumed))
        return self._pick(
            [
                PhysicalOp(
                    kind,
                    child=left,
                    node=name,
                    source=edge.src,
                    attr=edge.attr,
                    conds=conds,
                    exp_conds=exp_conds,
                    consumed=consumed,
                    visible=visible,
                    est_card=card,
                    ref_card=ref_card,
                    cond_cards=cond_cards,
                )
                for kind in kinds
            ]
        )

    def _join(self, left: PhysicalOp, name: str, vis: int, resolved: ResolvedOp) -> PhysicalOp:
        est = self.est
        right = self.scan(name)
        conds = tuple(c for c in resolved.conds if not _is_true(c))
        exp_conds = tuple(resolved.exp_conds)
        visible = left.visible + (name,)
        card = est.join(list(visible), left.est_card, right.est_card, conds, exp_conds)

        def side(c: ExpCond) -> float:
            return left.est_card if self.q.bit[c.source.node] & vis else right.est_card

        cond_cards = tuple(side(c) * est.degree(c.source.node, c.source.attr) for c in exp_conds)
        kinds = [OpKind.NL_JOIN]
        if self.options.hash_ops and _keys_between(conds, name):
            kinds.append(OpKind.HASH_JOIN)
        consumed = tuple(self.q.members(resolved.consumed))
        return self._pick(
            [
                PhysicalOp(
                    kind,
                    child=left,
                    right=right,
                    node=name,
                    conds=conds,
                    exp_conds=exp_conds,
                    consumed=consumed,
                    visible=visible,
                    est_card=card,
                    cond_cards=cond_cards,
                )
                for kind in kinds
            ]
        )

    # -----------------------
    # goals
    # -----------------------

    def is_goal(self, state: State) -> bool:
        q = self.q
        if state.vis & q.mandatory != q.mandatory:
            return False
        placed = state.vis | state.cons
        if any(not m & placed for m in self.link_masks):
            return False
        return all(m & state.vis for m in self.pinned_masks)

    def finish(self, state: State) -> PhysicalOp:
        op = state.op
        if self.q.residual:
            op = PhysicalOp(
                OpKind.FILTER,
                child=op,
                conds=tuple(self.q.residual),
                visible=op.visible,
                est_card=op.est_card,
                cum_cost=op.cum_cost,
            )
        return PhysicalOp(
            OpKind.PROJECT,
            child=op,
            outputs=tuple(self.q.outputs),
            visible=op.visible,
            est_card=op.est_card,
            cum_cost=op.cum_cost,
        )

    @cached_property
    def expansions(self) -> dict[int, int]:
        """Visible node set to the nodes a single step may add to it."""
        out: dict[int, int] = {}
        for s1, s2 in enumerate_mask_pairs(self.q, left_deep=True):
            if s2 & (s2 - 1) == 0:
                out[s1] = out.get(s1, 0) | s2
            if s1 & (s1 - 1) == 0:
                out[s2] = out.get(s2, 0) | s1
        logger.debug(f"🧩 {len(out)} expandable node sets")
        return out

    def _steps(self, state: State) -> Iterator[tuple[str, State]]:
        q = self.q
        for name in q.members(self.expansions.get(state.vis, 0) & ~state.cons):
            nxt = self.extend(state, name)
            if nxt is not None:
                yield name, nxt

    # -----------------------
    # searches
    # -----------------------

    def optimize(self) -> PhysicalOp:
        """
        Dynamic program over (visible, consumed) states, level by level by the number
        of visible nodes, keeping the cheapest operator tree per state.

        Raises:
            PlanError: If no state covers the query graph.
        """
        table: dict[tuple[int, int], State] = {}
        levels: dict[int, dict[tuple[int, int], State]] = {}
        for state in self.base_states():
            key = (state.vis, state.cons)
            if key not in table or state.op.cum_cost < table[key].op.cum_cost:
                table[key] = state
                levels.setdefault(1, {})[key] = state
        best: Optional[State] = None
        for k in range(1, len(self.q.names) + 1):
            for key, state in list(levels.get(k, {}).items()):
                if self.is_goal(state) and (best is None or state.op.cum_cost < best.op.cum_cost):
                    best = state
                for _, nxt in self._steps(state):
                    nkey = (nxt.vis, nxt.cons)
                    held = table.get(nkey)
                    if held is None or nxt.op.cum_cost < held.op.cum_cost:
                        table[nkey] = nxt
                        levels.setdefault(nxt.vis.bit_count(), {})[nkey] = nxt
        if best is None:
            raise PlanError("no legal plan covers the query graph")
        logger.debug(f"🧭 {len(table)} plan states, best cost {best.op.cum_cost:.1f}")
        return self.finish(best)

    def left_deep(self, order: Iterable[str]) -> PhysicalOp:
        """
        The plan adding nodes in the given order, deferring a node until it can be
        added; nodes outside the order are tried last.

        Raises:
            PlanError: If the order cannot be completed.
        """
        q = self.q
        pending = [n for n in order if n in q.bit]
        pending += [n for n in q.names if n not in pending and not q.nodes[n].optional]
        first = next((n for n in pending if not q.nodes[n].is_edge), None)
        if first is None:
            raise PlanError("no scannable node in the query graph")
        pending.remove(first)
        state = State(self.scan(first), q.bit[first])
        while not self.is_goal(state):
            pending = [n for n in pending if not q.bit[n] & (state.vis | state.cons)]
            neighbors = self.expansions.get(state.vis, 0)
            for i, name in enumerate(pending):
                if not q.bit[name] & neighbors:
                    continue
                nxt = self.extend(state, name)
                if nxt is not None:
                    state = nxt
                    pending.pop(i)
                    break
            else:
                raise PlanError(f"order {list(order)} cannot be completed")
        return self.finish(state)

    def enumerate_plans(self, limit: Optional[int] = None) -> list[PhysicalOp]:
        """Every complete left-deep legal plan (for small query graphs)."""
        out: list[PhysicalOp] = []

        def visit(state: State):
            if limit is not None and len(out) >= limit:
                return
            if self.is_goal(state):
                out.append(self.finish(state))
                return
            for _, nxt in self._steps(state):
                visit(nxt)

        for state in self.base_states():
            visit(state)
        return out


class Planner:
    """
    Turns bound logical plans into physical plans: δ-join operands are planned first
    and enter the outer query as base nodes with their estimated cardinality.
    """

    def __init__(
        self,
        catalog: Catalog,
        stats: GraphStats,
        params: Optional[CostParams] = None,
        options: Optional[PlannerOptions] = None,
        override: Optional[StatsOverride] = None,
        default_cardinality: float = 1000.0,
        default_degree: float = 1.0,
    ):
        self.catalog = catalog
        self.stats = stats
        self.params = params or CostParams()
        self.options = options or PlannerOptions()
        self.override = override
        self.default_cardinality = default_cardinality
        self.default_degree = default_degree

    def _derived(self, logical: LogicalPlan) -> dict[str, PhysicalOp]:
        ops = {}
        for name, node in logical.nodes.items():
            if node.kind is not NodeKind.DERIVED:
                continue
            spec = node.payload
            left, right = self.plan(spec.left), self.plan(spec.right)
            op = PhysicalOp(
                OpKind.DELTA_JOIN,
                child=left.root,
                right=right.root,
                node=name,
                matcher=spec.matcher,
                visible=(name,),
                est_card=delta_join_card(left.root.est_card, right.root.est_card),
                sides=(left, right),
            )
            annotate_costs(op, self.params)
            ops[name] = op
        return ops

    def search(self, logical: LogicalPlan) -> PlanSearch:
        derived = self._derived(logical)
        q = build_query_graph(logical, self.catalog, intersective=self.options.intersective)
        if self.options.candidates:
            q = add_candidates(q, self.catalog)
        estimator = Estimator(
            q,
            self.stats,
            self.override,
            self.default_cardinality,
            self.default_degree,
            {name: op.est_card for name, op in derived.items()},
        )
        return PlanSearch(q, estimator, self.params, self.options, derived)

    def plan(self, logical: LogicalPlan) -> PhysicalPlan:
        search = self.search(logical)
        if self.options.optimizer:
            root = search.optimize()
        else:
            root = search.left_deep(search.q.order)
        logger.debug(f"🧭 plan cost {root.cum_cost:.1f}, {len(search.q.nodes)} nodes")
        return PhysicalPlan(root, search.q)


def optimize(
    q: QueryGraph,
    stats: GraphStats,
    params: CostParams,
    override: Optional[StatsOverride] = None,
    options: Optional[PlannerOptions] = None,
) -> PhysicalPlan:
    """Cheapest left-deep plan of a query graph without δ-join nodes."""
    search = PlanSearch(q, Estimator(q, stats, override), params, options)
    return PhysicalPlan(search.optimize(), q)


def plan_left_deep(
    q: QueryGraph,
    stats: GraphStats,
    params: CostParams,
    order: list[str],
    override: Optional[StatsOverride] = None,
    options: Optional[PlannerOptions] = None,
) -> PhysicalPlan:
    search = PlanSearch(q, Estimator(q, stats, override), params, options)
    return PhysicalPlan(search.left_deep(order), q)
