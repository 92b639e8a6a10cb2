"""
Binding of SQL_δ syntax trees against the catalog, and the canonical logical plan.

Pattern subqueries, relations and joins are flattened into one set of named nodes:

    V.<var>   vertex variable        (rows of <g>.V)
    O.<var>   edge variable, forward (rows of <g>.E_out)
    I.<var>   edge variable, reverse (rows of <g>.E_in)
    R.<alias> relation
    M.<n>     result of a `map` (δ-join), planned on its own
    C.<var>   candidate set of a vertex variable (added by the planner)
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterator, Optional, Union

from app.core.exceptions import BindError
from app.graph.rg import IN_COLUMNS, OUT_COLUMNS, V_COLUMNS, RgGraphStore
from app.models.expressions import (
    EDGE_PREFIX,
    BoolOp,
    Cmp,
    Col,
    Const,
    ExpCond,
    edge_var,
    nodes_of,
    rename_nodes,
)
from app.sqldelta.ast import (
    BoolExpr,
    ColumnRef,
    Comparison,
    JoinRef,
    Literal,
    MapRef,
    Select,
    Star,
    SubqueryRef,
    TableRef,
    conjuncts,
)
from app.store.store import RgStore

logger = logging.getLogger(__name__)


class NodeKind(str, Enum):
    VERTEX = "vertex"
    OUT = "out"
    IN = "in"
    RELATION = "relation"
    CANDIDATE = "candidate"
    DERIVED = "derived"


EDGE_KINDS = (NodeKind.OUT, NodeKind.IN)

# ref column followed from an edge node to the vertex at its far end
FAR_ATTR = {NodeKind.OUT: "dst_L", NodeKind.IN: "src_L"}


@dataclass
class QNode:
    name: str
    kind: NodeKind
    relation: Optional[str]
    columns: tuple[str, ...]
    graph: Optional[str] = None
    label: Optional[str] = None
    filters: list = field(default_factory=list)
    link: Optional[int] = None
    pinned: bool = False
    payload: Any = None

    @property
    def is_edge(self) -> bool:
        return self.kind in EDGE_KINDS

    @property
    def optional(self) -> bool:
        return self.kind is NodeKind.CANDIDATE

    @property
    def far_attr(self) -> Optional[str]:
        return FAR_ATTR.get(self.kind)

    def describe_filter(self) -> str:
        return " and ".join(str(f) for f in self.filters) if self.filters else "-"


@dataclass
class PatternLink:
    """One pattern edge `(src)-[var: label]->(dst)` and the two edge nodes encoding it."""

    index: int
    var: str
    src: str
    dst: str
    label: Optional[str]
    out_node: str
    in_node: str
    graph: str
    pinned: bool = False


@dataclass(frozen=True)
class OutputColumn:
    name: str
    expr: Any
    qualifier: Optional[str] = None

    @property
    def key(self) -> str:
        return f"{self.qualifier}.{self.name}" if self.qualifier else self.name


@dataclass(frozen=True)
class MatcherBinding:
    kind: str
    left: str
    right: str
    a0: str
    threshold: Optional[float] = None


@dataclass
class DerivedSpec:
    left: "LogicalPlan"
    right: "LogicalPlan"
    matcher: MatcherBinding
    columns: tuple[str, ...]


# -----------------------
# LOGICAL OPERATORS
# -----------------------


@dataclass
class LScan:
    node: str


@dataclass
class LExplore:
    child: "LogicalOp"
    source: str
    attr: str
    target: str
    exp_conds: list = field(default_factory=list)
    conds: list = field(default_factory=list)


@dataclass
class LValueJoin:
    left: "LogicalOp"
    right: "LogicalOp"
    conds: list = field(default_factory=list)


@dataclass
class LDeltaJoin:
    node: str


@dataclass
class LFilter:
    child: "LogicalOp"
    conds: list


@dataclass
class LProject:
    child: "LogicalOp"
    outputs: list[OutputColumn]


LogicalOp = Union[LScan, LExplore, LValueJoin, LDeltaJoin, LFilter, LProject]


@dataclass
class LogicalPlan:
    root: LProject
    nodes: dict[str, QNode]
    links: list[PatternLink]
    value_conds: list
    residual: list

    @property
    def outputs(self) -> list[OutputColumn]:
        return self.root.outputs

    def walk(self) -> Iterator[LogicalOp]:
        stack = [self.root]
        while stack:
            op = stack.pop()
            yield op
            for attr in ("right", "left", "child"):
                sub = getattr(op, attr, None)
                if sub is not None:
                    stack.append(sub)

    def leaf_order(self) -> list[str]:
        """Nodes in the order the canonical plan introduces them."""
        out: list[str] = []

        def visit(op):
            if isinstance(op, (LScan, LDeltaJoin)):
                out.append(op.node)
            elif isinstance(op, LExplore):
                visit(op.child)
                out.append(op.target)
            elif isinstance(op, LValueJoin):
                visit(op.left)
                visit(op.right)
            else:
                visit(op.child)

        visit(self.root)
        return out

    def topology_checks(self) -> dict[int, int]:
        """Per pattern edge, how many topology checks the plan makes for it."""
        counts = {link.index: 0 for link in self.links}
        link_of = {}
        for link in self.links:
            link_of[link.out_node] = link.index
            link_of[link.in_node] = link.index
        for op in self.walk():
            if isinstance(op, LExplore) and op.attr in ("out_L", "in_L"):
                counts[link_of[op.target]] += 1
            for cond in getattr(op, "exp_conds", None) or getattr(op, "conds", None) or []:
                if isinstance(cond, ExpCond):
                    counts[link_of[cond.helper]] += 1
        return counts

    def explain(self) -> str:
        lines: list[str] = []

        def emit(op, depth):
            pad = "  " * depth
            if isinstance(op, LProject):
                lines.append(f"{pad}Project [{', '.join(o.name for o in op.outputs)}]")
                emit(op.child, depth + 1)
            elif isinstance(op, LFilter):
                lines.append(f"{pad}Filter {' and '.join(str(c) for c in op.conds)}")
                emit(op.child, depth + 1)
            elif isinstance(op, LValueJoin):
                lines.append(f"{pad}ValueJoin {' and '.join(str(c) for c in op.conds) or 'true'}")
                emit(op.left, depth + 1)
                emit(op.right, depth + 1)
            elif isinstance(op, LExplore):
                extra = [str(c) for c in op.exp_conds + op.conds]
                tail = f" [{'; '.join(extra)}]" if extra else ""
                lines.append(f"{pad}Explore {op.source}.{op.attr} -> {op.target}{tail}")
                emit(op.child, depth + 1)
            elif isinstance(op, LDeltaJoin):
                lines.append(f"{pad}DeltaJoin {op.node}")
            else:
                node = self.nodes[op.node]
                lines.append(f"{pad}Scan {op.node} ({node.relation}) filter={node.describe_filter()}")

        emit(self.root, 0)
        return "\n".join(lines)


# -----------------------
# CATALOG AND SCOPES
# -----------------------


@dataclass
class Catalog:
    store: RgStore
    graphs: dict[str, RgGraphStore] = field(default_factory=dict)
    tables: list[str] = field(default_factory=list)

    def columns(self, table: str) -> list[str]:
        return list(self.store.relation(table).schema.names)


@dataclass
class Binding:
    kind: str
    node: Optional[str] = None
    columns: dict = field(default_factory=dict)
    graph: Optional[RgGraphStore] = None


Scope = dict[str, Binding]


def closure_cond(edge_node: str, far_attr: str, vertex: str) -> Cmp:
    """The edge node's far ref designates the given vertex."""
    return Cmp("=", Col(edge_node, far_attr, deref="vid"), Col(vertex, "vid"))


class Binder:
    """
    Resolves names of one query level (subqueries flattened into it) and builds the
    canonical logical plan. Each `map` operand gets a binder of its own.
    """

    def __init__(self, catalog: Catalog, counter: Optional[Iterator[int]] = None):
        self.catalog = catalog
        self.counter = counter if counter is not None else itertools.count()
        self.nodes: dict[str, QNode] = {}
        self.links: list[PatternLink] = []
        self.link_of_var: dict[str, PatternLink] = {}
        self.value_conds: list = []
        self.residual: list = []

    def bind(self, query: Select) -> LogicalPlan:
        tree, outputs = self._select(query, None)
        return self._finish(tree, outputs)

    def _finish(self, tree, outputs: list[OutputColumn]) -> LogicalPlan:
        if self.residual:
            tree = LFilter(tree, list(self.residual))
        return LogicalPlan(LProject(tree, outputs), self.nodes, self.links, self.value_conds, self.residual)

    # -----------------------
    # naming
    # -----------------------

    def _name(self, prefixes: tuple[str, ...], suffix: str, alias: Optional[str]) -> str:
        """A suffix free under every prefix; `<alias>.<suffix>` on collision."""
        head = alias or "q"
        candidates = itertools.chain([suffix, f"{head}.{suffix}"], (f"{head}{k}.{suffix}" for k in itertools.count(1)))
        return next(c for c in candidates if all(f"{p}.{c}" not in self.nodes for p in prefixes))

    # -----------------------
    # select levels
    # -----------------------

    def _select(self, query: Select, alias: Optional[str]) -> tuple[Any, list[OutputColumn]]:
        if query.is_pattern:
            rg = self._graph_of(query.source)
            scope, links = self._declare_pattern(query, rg, alias)
            for cond in conjuncts(query.where):
                self._classify(self._bind_cond(cond, scope))
            outputs = self._outputs(query, scope)
            tree = self._pattern_tree(links, [b.node for b in scope.values() if b.kind == "vertex"])
        else:
            if query.source is None:
                raise BindError("select needs a from clause")
            tree, scope = self._from(query.source)
            for cond in conjuncts(query.where):
                self._classify(self._bind_cond(cond, scope))
            outputs = self._outputs(query, scope)
        if alias is not None:
            outputs = [replace(o, qualifier=alias) for o in outputs]
        return tree, outputs

    def _graph_of(self, source) -> RgGraphStore:
        if source is None:
            if len(self.catalog.graphs) == 1:
                return next(iter(self.catalog.graphs.values()))
            raise BindError("match needs a graph name in the from clause")
        rg = self.catalog.graphs.get(source.name)
        if rg is None:
            raise BindError(f"unknown graph {source.name}")
        return rg

    def _declare_pattern(self, query: Select, rg: RgGraphStore, alias: Optional[str]) -> tuple[Scope, list[PatternLink]]:
        labels: dict[str, Optional[str]] = {}
        edges: list[tuple[str, Optional[str], str, str]] = []
        for path in query.paths:
            path_vars = []
            for node in path.nodes:
                var = node.var or f"_v{next(self.counter)}"
                if var in labels:
                    known = labels[var]
                    if node.label and known and node.label != known:
                        raise BindError(f"vertex {var} has conflicting labels {known} and {node.label}")
                    labels[var] = known or node.label
                else:
                    labels[var] = node.label
                path_vars.append(var)
            for k, edge in enumerate(path.edges):
                var = edge.var or f"_{next(self.counter)}"
                if any(var == e[0] for e in edges):
                    raise BindError(f"edge variable {var} is declared twice")
                src, dst = path_vars[k], path_vars[k + 1]
                edges.append((var, edge.label, src, dst))
        clash = {e[0] for e in edges} & set(labels)
        if clash:
            raise BindError(f"variable {sorted(clash)[0]} names both a vertex and an edge")

        scope: Scope = {}
        vertex_node: dict[str, str] = {}
        for var, label in labels.items():
            name = "V." + self._name(("V",), var, alias)
            filters = [Cmp("=", Col(name, "label"), Const(label))] if label else []
            self.nodes[name] = QNode(name, NodeKind.VERTEX, rg.d_v, V_COLUMNS, rg.name, label, filters)
            vertex_node[var] = name
            scope[var] = Binding("vertex", name, graph=rg)
        links = []
        for var, label, src, dst in edges:
            suffix = self._name(("O", "I", "E"), var, alias)
            index = len(self.links)
            for prefix, kind, relation, columns in (
                ("O", NodeKind.OUT, rg.d_out, OUT_COLUMNS),
                ("I", NodeKind.IN, rg.d_in, IN_COLUMNS),
            ):
                name = f"{prefix}.{suffix}"
                filters = [Cmp("=", Col(name, "label"), Const(label))] if label else []
                self.nodes[name] = QNode(name, kind, relation, columns, rg.name, label, filters, link=index)
            link = PatternLink(index, var, vertex_node[src], vertex_node[dst], label, f"O.{suffix}", f"I.{suffix}", rg.name)
            self.links.append(link)
            self.link_of_var[EDGE_PREFIX + suffix] = link
            links.append(link)
            scope[var] = Binding("edge", EDGE_PREFIX + suffix, graph=rg)
        return scope, links

    def _pattern_tree(self, links: list[PatternLink], vertices: list[str]):
        """
        Pattern edges in textual order, deferring an edge until one of its endpoints is
        bound. An edge with both endpoints bound becomes an explorative condition; a
        self-loop is explored from its vertex and closed on it. Components that share no
        vertex, isolated vertices included, enter by cross product.
        """
        tree = None
        bound: set[str] = set()
        far: dict[str, str] = {}
        introduced: dict[str, tuple[LExplore, frozenset]] = {}
        late: list[ExpCond] = []
        pending = list(links)
        while pending:
            pick = next(
                (i for i, ln in enumerate(pending) if tree is None or ln.src in bound or ln.dst in bound),
                0,
            )
            link = pending.pop(pick)
            if tree is None:
                tree = LScan(link.src)
                bound.add(link.src)
            elif link.src not in bound and link.dst not in bound:
                tree = LValueJoin(tree, LScan(link.src), [])
                bound.add(link.src)
            src_bound, dst_bound = link.src in bound, link.dst in bound
            if src_bound and not dst_bound:
                tree = LExplore(tree, link.src, "out_L", link.out_node)
                introduced[link.out_node] = (tree, frozenset(bound))
                tree = LExplore(tree, link.out_node, "dst_L", link.dst)
                far[link.out_node] = link.dst
                bound.add(link.dst)
            elif dst_bound and not src_bound:
                tree = LExplore(tree, link.dst, "in_L", link.in_node)
                introduced[link.in_node] = (tree, frozenset(bound))
                tree = LExplore(tree, link.in_node, "src_L", link.src)
                far[link.in_node] = link.src
                bound.add(link.src)
            elif link.pinned or link.src == link.dst:
                tree = LExplore(tree, link.src, "out_L", link.out_node, conds=[closure_cond(link.out_node, "dst_L", link.dst)])
                introduced[link.out_node] = (tree, frozenset(bound))
            else:
                cond, owner, witness = self._explorative_condition(link, far)
                op, bound_then = introduced[witness]
                if owner in bound_then:
                    op.exp_conds.append(cond)
                else:
                    late.append(cond)
        for vertex in vertices:
            if vertex not in bound:
                tree = LScan(vertex) if tree is None else LValueJoin(tree, LScan(vertex), [])
                bound.add(vertex)
        if late:
            tree = LFilter(tree, late)
        return tree

    def _explorative_condition(self, link: PatternLink, far: dict[str, str]) -> tuple[ExpCond, str, str]:
        for witness, target in far.items():
            if target == link.dst:
                probe = Col(witness, self.nodes[witness].far_attr)
                return ExpCond(Col(link.src, "out_L"), "dst_L", probe, link.out_node), link.src, witness
        for witness, target in far.items():
            if target == link.src:
                probe = Col(witness, self.nodes[witness].far_attr)
                return ExpCond(Col(link.dst, "in_L"), "src_L", probe, link.in_node), link.dst, witness
        raise BindError(f"edge {link.var} closes no explored path")

    # -----------------------
    # from clauses
    # -----------------------

    def _from(self, item) -> tuple[Any, Scope]:
        if isinstance(item, TableRef):
            if item.name in self.catalog.graphs:
                raise BindError(f"graph {item.name} can only be queried with a match clause")
            if item.name not in self.catalog.tables:
                raise BindError(f"unknown relation {item.name}")
            name = "R." + self._name(("R",), item.binding, None)
            columns = tuple(self.catalog.columns(item.name))
            self.nodes[name] = QNode(name, NodeKind.RELATION, item.name, columns)
            return LScan(name), {item.binding: Binding("relation", name, {c: Col(name, c) for c in columns})}
        if isinstance(item, SubqueryRef):
            tree, outputs = self._select(item.query, item.alias)
            columns = {}
            for o in outputs:
                columns.setdefault(o.name, o.expr)
            return tree, {item.alias: Binding("columns", columns=columns)}
        if isinstance(item, JoinRef):
            left, left_scope = self._from(item.left)
            right, right_scope = self._from(item.right)
            scope = self._merge(left_scope, right_scope)
            conds = [self._classify(self._bind_cond(c, scope)) for c in conjuncts(item.on)]
            return LValueJoin(left, right, conds), scope
        if isinstance(item, MapRef):
            return self._map(item)
        raise BindError(f"unsupported from item {item!r}")

    @staticmethod
    def _merge(left: Scope, right: Scope) -> Scope:
        dup = set(left) & set(right)
        if dup:
            raise BindError(f"alias {sorted(dup)[0]} is used twice")
        return {**left, **right}

    def _map(self, item: MapRef) -> tuple[Any, Scope]:
        sides = []
        for operand in (item.left, item.right):
            binder = Binder(self.catalog, self.counter)
            tree, scope = binder._from(operand)
            outputs = binder._star(scope, vertices=False)
            if not outputs:
                raise BindError("map operands must be relations with at least one column")
            sides.append((binder._finish(tree, outputs), outputs, scope))
        (left_plan, louts, lscope), (right_plan, routs, rscope) = sides
        self._merge(lscope, rscope)
        matcher = self._matcher(item, louts, routs)
        columns = tuple(o.key for o in louts) + tuple(o.key for o in routs[1:])
        name = f"M.{next(self.counter)}"
        self.nodes[name] = QNode(
            name, NodeKind.DERIVED, None, columns, payload=DerivedSpec(left_plan, right_plan, matcher, columns)
        )
        scope: Scope = {}
        for o in louts + routs[1:]:
            scope.setdefault(o.qualifier, Binding("columns")).columns.setdefault(o.name, Col(name, o.key))
        return LDeltaJoin(name), scope

    @staticmethod
    def _find_output(outputs: list[OutputColumn], ref: ColumnRef, side: str) -> OutputColumn:
        hits = [o for o in outputs if o.name == ref.name and (ref.qualifier is None or o.qualifier == ref.qualifier)]
        if len(hits) != 1:
            what = "unknown" if not hits else "ambiguous"
            raise BindError(f"{what} {side} column {ref} in map matcher")
        return hits[0]

    def _matcher(self, item: MapRef, louts: list[OutputColumn], routs: list[OutputColumn]) -> MatcherBinding:
        a0 = routs[0]
        spec = item.matcher
        if spec is None:
            same = [o for o in louts if o.name == a0.name]
            if len(same) != 1:
                raise BindError(f"map needs a left column named {a0.name} or a using clause")
            return MatcherBinding("exact", same[0].key, a0.key, a0.key)
        left = self._find_output(louts, spec.left, "left")
        right = self._find_output(routs, spec.right, "right")
        threshold = spec.threshold if spec.threshold is not None else (0.8 if spec.kind == "fuzzy" else None)
        return MatcherBinding(spec.kind, left.key, right.key, a0.key, threshold)

    # -----------------------
    # expressions
    # -----------------------

    def _outputs(self, query: Select, scope: Scope) -> list[OutputColumn]:
        outputs: list[OutputColumn] = []
        for item in query.items:
            if isinstance(item.expr, Star):
                if item.expr.qualifier is None:
                    outputs += self._star(scope, vertices=True)
                    continue
                binding = scope.get(item.expr.qualifier)
                if binding is None:
                    raise BindError(f"unknown alias {item.expr.qualifier}")
                outputs += self._star({item.expr.qualifier: binding}, vertices=True)
                continue
            expr = self._bind_scalar(item.expr, scope)
            for node in nodes_of(expr):
                if edge_var(node) is not None:
                    self._pin(node)
            if item.alias:
                name = item.alias
            elif isinstance(item.expr, ColumnRef):
                name = str(item.expr)
            else:
                name = str(expr)
            outputs.append(OutputColumn(name, expr))
        return outputs

    @staticmethod
    def _star(scope: Scope, vertices: bool) -> list[OutputColumn]:
        outputs = []
        for alias, binding in scope.items():
            if binding.kind == "vertex" and vertices:
                outputs.append(OutputColumn(alias, Col(binding.node, "vid")))
            elif binding.kind in ("relation", "columns"):
                outputs += [OutputColumn(n, e, alias) for n, e in binding.columns.items()]
        return outputs

    def _pin(self, enode: str):
        link = self.link_of_var[enode]
        link.pinned = True
        self.nodes[link.out_node].pinned = True
        self.nodes[link.in_node].pinned = True

    def _bind_cond(self, cond, scope: Scope):
        if isinstance(cond, Comparison):
            return Cmp(cond.op, self._bind_scalar(cond.left, scope), self._bind_scalar(cond.right, scope))
        if isinstance(cond, BoolExpr):
            return BoolOp(cond.op, tuple(self._bind_cond(c, scope) for c in cond.items))
        raise BindError(f"unsupported condition {cond!r}")

    def _bind_scalar(self, operand, scope: Scope):
        if isinstance(operand, Literal):
            return Const(operand.value)
        return self._resolve(operand, scope)

    def _resolve(self, ref: ColumnRef, scope: Scope):
        if ref.qualifier is not None:
            binding = scope.get(ref.qualifier)
            if binding is None:
                raise BindError(f"unknown alias {ref.qualifier}")
            return self._column_of(binding, ref)
        hits = [b.columns[ref.name] for b in scope.values() if b.kind in ("relation", "columns") and ref.name in b.columns]
        if len(hits) == 1:
            return hits[0]
        if hits:
            raise BindError(f"ambiguous column {ref.name}")
        binding = scope.get(ref.name)
        if binding is not None and binding.kind == "vertex":
            return Col(binding.node, "vid")
        raise BindError(f"unknown column {ref.name}")

    @staticmethod
    def _column_of(binding: Binding, ref: ColumnRef):
        if binding.kind in ("vertex", "edge"):
            kind = "V" if binding.kind == "vertex" else "E"
            key = "vid" if kind == "V" else "eid"
            attr = key if ref.name in ("id", key) else ref.name
            if attr in (key, "label") or attr in binding.graph.attr_names(kind):
                return Col(binding.node, attr)
            raise BindError(f"unknown attribute {ref}")
        if ref.name not in binding.columns:
            raise BindError(f"unknown column {ref}")
        return binding.columns[ref.name]

    def _classify(self, expr):
        """Files a bound conjunct as node filter, value condition or residual filter."""
        nodes = nodes_of(expr)
        edge_nodes = [n for n in nodes if edge_var(n) is not None]
        if len(nodes) == 1:
            (node,) = nodes
            if edge_nodes:
                link = self.link_of_var[node]
                for target in (link.out_node, link.in_node):
                    self.nodes[target].filters.append(rename_nodes(expr, lambda n, t=target: t))
            else:
                self.nodes[node].filters.append(expr)
        elif (
            len(nodes) == 2
            and not edge_nodes
            and isinstance(expr, Cmp)
            and isinstance(expr.left, Col)
            and isinstance(expr.right, Col)
        ):
            self.value_conds.append(expr)
        else:
            for node in edge_nodes:
                self._pin(node)
            self.residual.append(expr)
        return expr


def build_logical(query: Select, catalog: Catalog) -> LogicalPlan:
    """
    Binds a parsed query and builds its canonical logical plan.

    Raises:
        BindError: On unknown names, conflicting pattern declarations and `map`
            operands that are not relational.
    """
    plan = Binder(catalog).bind(query)
    logger.debug(f"🧭 logical plan:\n{plan.explain()}")
    return plan
