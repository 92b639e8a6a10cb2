"""
The extended query graph: relation aliases as nodes, with explore, value and duplicate
edges. Node sets are handled as bitmasks over the sorted node names.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Optional

from app.core.exceptions import BuildError
from app.graph.stats import candidate_vids
from app.models.expressions import TRUE, Cmp, Col, nodes_of
from app.sqldelta.logical import (
    Catalog,
    LogicalPlan,
    NodeKind,
    OutputColumn,
    PatternLink,
    QNode,
    closure_cond,
)

logger = logging.getLogger(__name__)


class EdgeKind(str, Enum):
    EXPLORE = "explore"
    VALUE = "value"
    DUPLICATE = "duplicate"


_KIND_ORDER = {EdgeKind.EXPLORE: 0, EdgeKind.VALUE: 1, EdgeKind.DUPLICATE: 2}


@dataclass(frozen=True)
class QEdge:
    kind: EdgeKind
    src: str
    dst: str
    attr: Optional[str] = None
    cond: Any = None
    same_pointer: bool = False
    closure: bool = False

    def describe(self) -> str:
        if self.kind is EdgeKind.EXPLORE:
            label = self.attr
        elif self.kind is EdgeKind.VALUE:
            label = str(self.cond)
        else:
            label = "-"
        return f"EDGE {self.kind.value} {label} {{{self.src}}}→{{{self.dst}}}"


@dataclass
class QueryGraph:
    nodes: dict[str, QNode]
    edges: list[QEdge]
    dup_pairs: list[tuple[str, str]]
    links: list[PatternLink] = field(default_factory=list)
    outputs: list[OutputColumn] = field(default_factory=list)
    residual: list = field(default_factory=list)
    order: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.names: list[str] = sorted(self.nodes)
        self.bit: dict[str, int] = {n: 1 << i for i, n in enumerate(self.names)}
        self.adjacent: dict[str, int] = defaultdict(int)
        self.explore_out: dict[str, list[QEdge]] = defaultdict(list)
        self.explore_in: dict[str, list[QEdge]] = defaultdict(list)
        self.value_at: dict[str, list[QEdge]] = defaultdict(list)
        self.partners: dict[str, list[QEdge]] = defaultdict(list)
        self.closures: set[tuple[str, str]] = set()
        # far-ref edges of self-loop pattern edges lead back to the vertex they start from
        self.loop_checks: set[tuple[str, str]] = set()
        for link in self.links:
            if link.src == link.dst:
                self.loop_checks.add((link.out_node, link.dst))
                self.loop_checks.add((link.in_node, link.src))
        self.dup: dict[str, str] = {}
        for a, b in self.dup_pairs:
            self.dup[a] = b
            self.dup[b] = a
        for e in self.edges:
            if e.kind is EdgeKind.DUPLICATE:
                continue
            self.adjacent[e.src] |= self.bit[e.dst]
            self.adjacent[e.dst] |= self.bit[e.src]
            if e.kind is EdgeKind.EXPLORE:
                self.explore_out[e.src].append(e)
                self.explore_in[e.dst].append(e)
            else:
                self.value_at[e.src].append(e)
                self.value_at[e.dst].append(e)
                if e.same_pointer:
                    self.partners[e.src].append(e)
                    self.partners[e.dst].append(e)
                if e.closure:
                    self.closures.add((e.src, e.dst))
                    self.closures.add((e.dst, e.src))
        # explore edge into each edge node from its near vertex
        self.entry: dict[str, QEdge] = {}
        for e in self.edges:
            if e.kind is EdgeKind.EXPLORE and self.nodes[e.dst].is_edge:
                self.entry[e.dst] = e
        self.full: int = (1 << len(self.names)) - 1
        self.mandatory: int = self.mask(n for n, q in self.nodes.items() if not q.is_edge and not q.optional)

    # -----------------------
    # node sets
    # -----------------------

    def mask(self, names: Iterable[str]) -> int:
        m = 0
        for n in names:
            m |= self.bit[n]
        return m

    def members(self, mask: int) -> list[str]:
        return [n for i, n in enumerate(self.names) if mask >> i & 1]

    def neighborhood(self, mask: int) -> int:
        out = 0
        for n in self.members(mask):
            out |= self.adjacent[n]
        return out & ~mask

    def is_connected(self, mask: int) -> bool:
        if not mask:
            return False
        seen = mask & -mask
        frontier = seen
        while frontier:
            nxt = self.neighborhood(seen) & mask
            frontier = nxt & ~seen
            seen |= nxt
        return seen == mask

    def edges_between(self, left: int, right: int) -> list[QEdge]:
        out = []
        for e in self.edges:
            if e.kind is EdgeKind.DUPLICATE:
                continue
            a, b = self.bit[e.src], self.bit[e.dst]
            if (a & left and b & right) or (a & right and b & left):
                out.append(e)
        return out

    def link_of(self, node: str) -> Optional[PatternLink]:
        index = self.nodes[node].link
        return None if index is None else self.links[index]

    def far_vertex(self, node: str) -> str:
        link = self.link_of(node)
        return link.dst if self.nodes[node].kind is NodeKind.OUT else link.src

    # -----------------------
    # debug dump
    # -----------------------

    def dump(self) -> str:
        lines = [f"NODE {n} filter={self.nodes[n].describe_filter()}" for n in self.names]
        edges = sorted(self.edges, key=lambda e: (_KIND_ORDER[e.kind], e.src, e.dst, e.describe()))
        lines += [e.describe() for e in edges]
        return "\n".join(lines)


def _check_regular(plan: LogicalPlan, catalog: Optional[Catalog]):
    if catalog is None:
        return
    for name in {q.graph for q in plan.nodes.values() if q.graph}:
        rg = catalog.graphs[name]
        for relation in (rg.d_v, rg.d_out, rg.d_in):
            for column in catalog.store.relation(relation).schema.columns:
                if column.is_ref and not column.ref_target:
                    raise BuildError(f"ref column {relation}.{column.name} has no single target relation")


def _connect_components(nodes: list[str], edges: list[QEdge]) -> list[QEdge]:
    """
    Cross products: joins the components with always-true value edges between their
    first nodes in `nodes` order.
    """
    parent = {n: n for n in nodes}

    def find(n):
        while parent[n] != n:
            parent[n] = parent[parent[n]]
            n = parent[n]
        return n

    for e in edges:
        if e.kind is not EdgeKind.DUPLICATE:
            parent[find(e.src)] = find(e.dst)
    roots: list[str] = []
    for n in nodes:
        if find(n) not in [find(r) for r in roots]:
            roots.append(n)
    return [QEdge(EdgeKind.VALUE, roots[0], r, cond=TRUE) for r in roots[1:]]


def build_query_graph(
    plan: LogicalPlan, catalog: Optional[Catalog] = None, intersective: bool = True
) -> QueryGraph:
    """
    Builds the extended query graph of a bound logical plan.

    One node per alias; per pattern edge the forward path V_src -out_L-> O -dst_L-> V_dst
    and the reverse path V_dst -in_L-> I -src_L-> V_src with (O, I) a duplicate pair;
    value edges for join conditions; same-pointer value edges between edge nodes of
    different pattern edges whose far refs designate the same pattern vertex.

    Closing conditions (far ref dereferenced to the vertex id) are added for pattern
    edges that must stay visible, for self-loops, and for every pattern edge when
    intersective exploration is disabled. Components without a path between them are
    tied by always-true value edges between vertex or relation nodes.

    Raises:
        BuildError: If a graph ref column does not target a single relation.
    """
    _check_regular(plan, catalog)
    nodes = dict(plan.nodes)
    edges: list[QEdge] = []
    dup_pairs: list[tuple[str, str]] = []
    for link in plan.links:
        o, i = link.out_node, link.in_node
        edges += [
            QEdge(EdgeKind.EXPLORE, link.src, o, "out_L"),
            QEdge(EdgeKind.EXPLORE, o, link.dst, "dst_L"),
            QEdge(EdgeKind.EXPLORE, link.dst, i, "in_L"),
            QEdge(EdgeKind.EXPLORE, i, link.src, "src_L"),
        ]
        dup_pairs.append((o, i))
        edges.append(QEdge(EdgeKind.DUPLICATE, o, i))
    for cond in plan.value_conds:
        a, b = sorted(nodes_of(cond))
        edges.append(QEdge(EdgeKind.VALUE, a, b, cond=cond))

    far = {}
    for link in plan.links:
        far[link.out_node] = link.dst
        far[link.in_node] = link.src
    edge_nodes = sorted(far)
    for k, x in enumerate(edge_nodes):
        for y in edge_nodes[k + 1:]:
            if nodes[x].link != nodes[y].link and far[x] == far[y]:
                cond = Cmp("=", Col(x, nodes[x].far_attr), Col(y, nodes[y].far_attr))
                edges.append(QEdge(EdgeKind.VALUE, x, y, cond=cond, same_pointer=True))

    for link in plan.links:
        if link.pinned or not intersective or link.src == link.dst:
            edges.append(QEdge(EdgeKind.VALUE, link.out_node, link.dst, cond=closure_cond(link.out_node, "dst_L", link.dst), closure=True))
            edges.append(QEdge(EdgeKind.VALUE, link.in_node, link.src, cond=closure_cond(link.in_node, "src_L", link.src), closure=True))

    edges += _connect_components(sorted(nodes, key=lambda n: (nodes[n].is_edge, n)), edges)
    q = QueryGraph(nodes, edges, dup_pairs, list(plan.links), list(plan.outputs), list(plan.residual), plan.leaf_order())
    logger.debug(f"query graph: {len(q.nodes)} nodes, {len(q.edges)} edges")
    return q


def add_candidates(q: QueryGraph, catalog: Catalog) -> QueryGraph:
    """
    Adds one optional candidate node per vertex node: the ids carrying the vertex's
    label and at least one out-/in-edge where the pattern requires one.
    """
    nodes = dict(q.nodes)
    edges = list(q.edges)
    for name, node in q.nodes.items():
        if node.kind is not NodeKind.VERTEX:
            continue
        rg = catalog.graphs[node.graph]
        min_out = int(any(link.src == name for link in q.links))
        min_in = int(any(link.dst == name for link in q.links))
        cname = "C." + name[2:]
        vids = candidate_vids(rg, node.label, min_out, min_in)
        nodes[cname] = QNode(cname, NodeKind.CANDIDATE, None, ("vid",), node.graph, payload=vids)
        edges.append(QEdge(EdgeKind.VALUE, cname, name, cond=Cmp("=", Col(cname, "vid"), Col(name, "vid"))))
    return QueryGraph(nodes, edges, list(q.dup_pairs), q.links, q.outputs, q.residual, q.order)
