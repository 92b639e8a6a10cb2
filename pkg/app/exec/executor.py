import logging
from dataclasses import dataclass, field
from typing import Iterator

from app.core.exceptions import ExecError, PlanError
from app.er.matchers import MaterializedRelation, build_matcher
from app.exec.chunk import Chunk, Layout, rows_of
from app.exec.conditions import Compiler, helper_filter
from app.exec.operators import (
    ExploreHashCache,
    delta_join,
    explore_hash,
    explore_nl,
    filter_rows,
    fragment_table,
    hash_join,
    ix_explore,
    membership_hash,
    membership_nl,
    nl_join,
    project,
    repeat_rows,
)
from app.graph.rg import RgGraphStore
from app.models.expressions import ExpCond, is_equi
from app.models.values import RefValue
from app.planner.physical import OpKind, PhysicalOp, PhysicalPlan
from app.sqldelta.logical import NodeKind
from app.store.store import RgStore

logger = logging.getLogger(__name__)


@dataclass
class QueryResult:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)


class Executor:
    """
    Runs physical plans chunk by chunk. Operators are chained generators, so a plan
    streams end to end except for hash-build sides and δ-join inputs.
    """

    def __init__(self, store: RgStore, graphs: dict[str, RgGraphStore], chunk_size: int = 2048):
        if chunk_size < 1:
            raise ExecError("chunk size must be positive")
        self.store = store
        self.graphs = graphs
        self.chunk_size = chunk_size

    def execute(self, plan: PhysicalPlan) -> QueryResult:
        return QueryResult(plan.columns, list(rows_of(self.stream(plan))))

    def stream(self, plan: PhysicalPlan) -> Iterator[Chunk]:
        return self._run(plan.root, plan)

    # -----------------------
    # helpers
    # -----------------------

    def _layout(self, plan: PhysicalPlan, visible) -> Layout:
        return Layout(plan.graph.nodes, visible)

    def _compiler(self, layout: Layout) -> Compiler:
        return Compiler(layout, self.store, self.graphs)

    def _render(self, value):
        if isinstance(value, RefValue):
            return tuple(sorted(row[0] for row in self.store.resolve(value)))
        return value

    def _base_rows(self, op: PhysicalOp, plan: PhysicalPlan) -> list[tuple]:
        node = plan.graph.nodes[op.node]
        if node.kind is NodeKind.VERTEX:
            return self.graphs[node.graph].vertex_rows()
        if node.kind is NodeKind.RELATION:
            return list(self.store.scan(node.relation))
        if node.kind is NodeKind.CANDIDATE:
            return [(vid,) for vid in node.payload]
        if node.kind is NodeKind.DERIVED:
            return self._delta_rows(op.subplan).rows
        raise PlanError(f"edge node {op.node} cannot be scanned")

    def _delta_rows(self, op: PhysicalOp) -> MaterializedRelation:
        left_plan, right_plan = op.sides
        sides = []
        for side in (left_plan, right_plan):
            result = self.execute(side)
            sides.append(MaterializedRelation([o.key for o in side.graph.outputs], result.rows))
        m = op.matcher
        matcher = build_matcher(m.kind, m.left, m.right, m.threshold)
        out = delta_join(sides[0], sides[1], matcher, m.a0)
        logger.debug(f"🚀 δ-join {matcher!r}: {len(sides[0])} x {len(sides[1])} -> {len(out)} rows")
        return out

    def _membership(self, cond: ExpCond, layout: Layout, plan: PhysicalPlan, hashed: bool):
        nodes = plan.graph.nodes
        source = layout.index(cond.source.node, cond.source.attr)
        field_at = nodes[cond.helper].columns.index(cond.field)
        keep = helper_filter(cond, nodes, self.store, self.graphs)
        probe = layout.index(cond.probe.node, cond.probe.attr)
        if source is None or probe is None:
            raise PlanError(f"explorative condition {cond} needs stored columns")
        if hashed:
            return membership_hash(source, field_at, probe, self.store.resolve, keep, self.store.referent_key)
        return membership_nl(source, field_at, probe, self.store.resolve, keep)

    # -----------------------
    # operators
    # -----------------------

    def _run(self, op: PhysicalOp, plan: PhysicalPlan) -> Iterator[Chunk]:
        size = self.chunk_size
        kind = op.kind
        layout = self._layout(plan, op.visible)
        width = layout.width
        logger.debug(f"🚀 {kind.value} {op.node or ''}")

        if kind is OpKind.SCAN:
            keep = self._compiler(self._layout(plan, (op.node,))).conjunction(op.conds)
            return filter_rows([Chunk.from_rows(self._base_rows(op, plan), width)], keep, size, width)

        if kind is OpKind.PROJECT:
            compiler = self._compiler(layout)
            render = self._render
            getters = [compiler.scalar(o.expr) for o in op.outputs]
            rendered = [lambda row, g=g: render(g(row)) for g in getters]
            return project(self._run(op.child, plan), rendered, size)

        if kind is OpKind.FILTER:
            keep = self._compiler(layout).conjunction(op.conds)
            return filter_rows(self._run(op.child, plan), keep, size, width)

        if op.is_explore:
            return self._explore(op, plan, layout)

        if kind in (OpKind.HASH_JOIN, OpKind.NL_JOIN):
            return self._join(op, plan, layout)

        raise PlanError(f"operator {kind.value} cannot run inside a plan")

    def _explore(self, op: PhysicalOp, plan: PhysicalPlan, layout: Layout) -> Iterator[Chunk]:
        size, width = self.chunk_size, layout.width
        node = plan.graph.nodes[op.node]
        in_layout = self._layout(plan, op.child.visible)
        ref_col = in_layout.index(op.source, op.attr)
        theta = self._compiler(layout).conjunction(list(node.filters) + list(op.conds))
        child = self._run(op.child, plan)
        resolve = self.store.resolve
        if op.kind is OpKind.EXPLORE_NL:
            return explore_nl(child, ref_col, resolve, theta, size, width)
        if op.kind is OpKind.EXPLORE_HASH:
            key = next(c for c in op.conds if is_equi(c) and op.node in (c.left.node, c.right.node))
            inner, outer = (key.left, key.right) if key.left.node == op.node else (key.right, key.left)
            probe_key = self._compiler(in_layout).column(outer)
            build_key = self._compiler(self._layout(plan, (op.node,))).column(inner)
            cache = ExploreHashCache(fragment_table(resolve, build_key), self.store.referent_key)
            return explore_hash(child, ref_col, resolve, probe_key, build_key, theta, size, width, cache)
        hashed = op.kind is OpKind.IX_EXPLORE_HASH
        memberships = [self._membership(c, layout, plan, hashed) for c in op.exp_conds]
        return ix_explore(child, ref_col, resolve, memberships, theta, size, width)

    def _join(self, op: PhysicalOp, plan: PhysicalPlan, layout: Layout) -> Iterator[Chunk]:
        size, width = self.chunk_size, layout.width
        conds = self._compiler(layout).conjunction(op.conds)
        memberships = [self._membership(c, layout, plan, True) for c in op.exp_conds]
        left = self._run(op.child, plan)
        right = self._run(op.right, plan)
        if op.kind is OpKind.NL_JOIN:
            joined = nl_join(left, right, conds, size, width)
            return repeat_rows(joined, memberships, size, width) if memberships else joined
        left_layout = self._layout(plan, op.child.visible)
        right_layout = self._layout(plan, op.right.visible)
        lkeys, rkeys = [], []
        for c in op.conds:
            if not is_equi(c):
                continue
            a, b = (c.left, c.right) if c.left.node in left_layout.offsets else (c.right, c.left)
            lkeys.append(self._compiler(left_layout).column(a))
            rkeys.append(self._compiler(right_layout).column(b))

        def left_key(row: tuple) -> tuple:
            return tuple(g(row) for g in lkeys)

        def right_key(row: tuple) -> tuple:
            return tuple(g(row) for g in rkeys)

        build_left = op.child.est_card < op.right.est_card
        joined = hash_join(left, right, left_key, right_key, conds, build_left, size, width)
        return repeat_rows(joined, memberships, size, width) if memberships else joined


def execute(plan: PhysicalPlan, store: RgStore, graphs: dict[str, RgGraphStore], chunk_size: int = 2048) -> QueryResult:
    return Executor(store, graphs, chunk_size).execute(plan)
