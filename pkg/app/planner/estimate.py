"""
Cardinality estimation for plan states, with an optional statistics override file.

Override file (TOML):

    default = 1e7                 # any unlisted set of two or more nodes

    [base]
    "V.v0" = 1e3                  # base cardinality of one node

    [degree]
    "V.v0.out_L" = 100            # mean fragment size behind node.ref_attr

    [cardinality]
    "O.e0,V.v0" = 1e4             # comma-joined visible node names, any order
"""

import logging

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Iterable, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator

from app.core.exceptions import ConfigError, NotFound
from app.graph.stats import GraphStats
from app.models.expressions import BoolOp, Cmp, Col, Const, ExpCond
from app.planner.querygraph import QueryGraph
from app.sqldelta.logical import NodeKind, QNode

logger = logging.getLogger(__name__)

EQ_SELECTIVITY = 0.1
RANGE_SELECTIVITY = 1 / 3
NE_SELECTIVITY = 0.9


def set_key(names: Iterable[str]) -> str:
    return ",".join(sorted(n.strip() for n in names))


class StatsOverride(BaseModel):
    default: Optional[float] = Field(default=None, ge=0)
    base: dict[str, float] = Field(default_factory=dict)
    degree: dict[str, float] = Field(default_factory=dict)
    cardinality: dict[str, float] = Field(default_factory=dict)

    @field_validator("cardinality")
    @classmethod
    def normalize_sets(cls, value: dict[str, float]) -> dict[str, float]:
        return {set_key(k.split(",")): v for k, v in value.items()}

    def lookup(self, names: Iterable[str]) -> Optional[float]:
        names = list(names)
        hit = self.cardinality.get(set_key(names))
        if hit is None and len(names) >= 2:
            return self.default
        return hit


def _flatten(table: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in table.items():
        name = f"{prefix}.{key}" if prefix else key
        if isinstance(value, dict):
            out.update(_flatten(value, name))
        else:
            out[name] = value
    return out


def load_override(path: str | Path) -> StatsOverride:
    """
    Reads a statistics override file.

    Raises:
        NotFound: If the file does not exist.
        ConfigError: If it is not valid TOML or does not fit the override schema.
    """
    path = Path(path)
    if not path.is_file():
        raise NotFound(f"stats override file {path} not found")
    try:
        with path.open("rb") as f:
            raw = tomllib.load(f)
        sections = {k: _flatten(v) if isinstance(v, dict) else v for k, v in raw.items()}
        override = StatsOverride(**sections)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"stats override {path}: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"stats override {path}: {e.errors()[0]['msg']}") from e
    logger.info(f"🧭 stats override {path}: {len(override.cardinality)} cardinalities")
    return override


class Estimator:
    """
    Estimates node and intermediate-result cardinalities over one query graph.

    Exploration output is |T|·deg(A) times the filter selectivity of the new node;
    each explorative condition keeps a row with probability min(1, deg(A')·sel/|V|).
    Value joins follow the independence rule |T1||T2|/max(ndv). Sets named in the
    override's cardinality table take the listed value.
    """

    def __init__(
        self,
        q: QueryGraph,
        stats: GraphStats,
        override: Optional[StatsOverride] = None,
        default_cardinality: float = 1000.0,
        default_degree: float = 1.0,
        derived: Optional[dict[str, float]] = None,
    ):
        self.q = q
        self.stats = stats
        self.override = override or StatsOverride()
        self.default_cardinality = default_cardinality
        self.default_degree = default_degree
        self.derived = derived or {}
        self._base: dict[str, float] = {}

    # -----------------------
    # nodes
    # -----------------------

    def _count(self, node: QNode) -> float:
        if node.kind is NodeKind.CANDIDATE:
            return float(len(node.payload or ()))
        if node.kind is NodeKind.DERIVED:
            return self.derived.get(node.name, self.default_cardinality)
        count = self.stats.cardinality(node.relation)
        return float(count) if count is not None else self.default_cardinality

    def base(self, name: str) -> float:
        hit = self._base.get(name)
        if hit is None:
            node = self.q.nodes[name]
            hit = self.override.base.get(name)
            if hit is None:
                hit = self._count(node) * self.node_selectivity(node)
            self._base[name] = hit
        return hit

    def degree(self, name: str, attr: str) -> float:
        hit = self.override.degree.get(f"{name}.{attr}")
        if hit is not None:
            return hit
        node = self.q.nodes[name]
        if node.relation is not None:
            hit = self.stats.degree(node.relation, attr, node.label)
        return hit if hit is not None else self.default_degree

    def node_selectivity(self, node: QNode) -> float:
        sel = 1.0
        for f in node.filters:
            sel *= self.selectivity(node, f)
        return sel

    def ndv(self, col: Col) -> Optional[float]:
        node = self.q.nodes[col.node]
        if col.attr in ("vid", "eid"):
            return self.base(col.node) or None
        if node.relation is not None:
            hit = self.stats.ndv(node.relation, col.attr)
            if hit:
                return float(hit)
        return None

    def selectivity(self, node: QNode, expr) -> float:
        if isinstance(expr, BoolOp):
            parts = [self.selectivity(node, e) for e in expr.items]
            if expr.op == "and":
                out = 1.0
                for p in parts:
                    out *= p
                return out
            miss = 1.0
            for p in parts:
                miss *= 1.0 - p
            return 1.0 - miss
        if not isinstance(expr, Cmp):
            return 1.0
        if expr.op == "!=":
            return NE_SELECTIVITY
        if expr.op != "=":
            return RANGE_SELECTIVITY
        col = expr.left if isinstance(expr.left, Col) else expr.right
        other = expr.right if col is expr.left else expr.left
        if isinstance(col, Col) and isinstance(other, Const):
            if col.attr == "label" and node.relation is not None:
                sel = self.stats.label_selectivity(node.relation, other.value)
                if sel is not None:
                    return sel
            ndv = self.ndv(col)
            if ndv:
                return 1.0 / ndv
        return EQ_SELECTIVITY

    # -----------------------
    # intermediate results
    # -----------------------

    def vertex_count(self, name: str) -> float:
        node = self.q.nodes[name]
        if node.graph is not None:
            rel = f"{node.graph}.V"
            count = self.stats.cardinality(rel)
            if count:
                return float(count)
        return self.default_cardinality

    def cond_selectivity(self, cond, left_card: float, right_card: float) -> float:
        if isinstance(cond, BoolOp) and not cond.items:
            return 1.0
        if not isinstance(cond, Cmp) or not isinstance(cond.left, Col) or not isinstance(cond.right, Col):
            return RANGE_SELECTIVITY
        if cond.op != "=":
            return NE_SELECTIVITY if cond.op == "!=" else RANGE_SELECTIVITY
        a, b = cond.left, cond.right
        if a.deref or self.q.nodes[a.node].is_edge and a.attr in ("dst_L", "src_L"):
            return 1.0 / max(self.vertex_count(a.node), 1.0)
        ndvs = [n for n in (self.ndv(a), self.ndv(b)) if n]
        if not ndvs:
            return 1.0 / max(left_card, right_card, 1.0)
        return 1.0 / max(ndvs)

    def exp_selectivity(self, cond: ExpCond) -> float:
        fan = self.degree(cond.source.node, cond.source.attr)
        helper = self.q.nodes[cond.helper]
        return min(1.0, fan * self.node_selectivity(helper) / max(self.vertex_count(cond.helper), 1.0))

    def lookup(self, names: Iterable[str]) -> Optional[float]:
        return self.override.lookup(names)

    def explore(self, names: list[str], card: float, source: str, attr: str, target: str, conds, exp_conds) -> float:
        hit = self.lookup(names)
        if hit is not None:
            return hit
        out = card * self.degree(source, attr) * self.node_selectivity(self.q.nodes[target])
        for c in conds:
            out *= self.cond_selectivity(c, card, out)
        for c in exp_conds:
            out *= self.exp_selectivity(c)
        return out

    def join(self, names: list[str], left: float, right: float, conds, exp_conds) -> float:
        hit = self.lookup(names)
        if hit is not None:
            return hit
        out = left * right
        for c in conds:
            out *= self.cond_selectivity(c, left, right)
        for c in exp_conds:
            out *= self.exp_selectivity(c)
        return out


def delta_join_card(left: float, right: float) -> float:
    """Matched pairs of a δ-join: about one partner per row of the smaller side."""
    return left * right / max(left, right, 1.0)
