"""Operator resolution for a legal CSG-CMP pair."""

from dataclasses import dataclass, field
from typing import Optional

from app.models.expressions import Col, ExpCond
from app.planner.querygraph import EdgeKind, QEdge, QueryGraph


@dataclass
class ResolvedOp:
    """Explore (when `explore` is set) or ValueJoin, with the conditions it carries."""

    explore: Optional[QEdge]
    conds: list = field(default_factory=list)
    exp_conds: list[ExpCond] = field(default_factory=list)
    consumed: int = 0

    @property
    def is_explore(self) -> bool:
        return self.explore is not None


def resolve_exp(q: QueryGraph, csg0: int, csg1: int, consumed: int = 0) -> list[ExpCond]:
    """
    Explorative conditions ψ(A)[B] ∋ C: for an edge node h outside both sides, reached
    by explore edge A from csg0 and tied by a same-pointer condition h.B = m.C to a
    node m of csg1. Each h is consumed at most once, never when it must stay visible
    or when its duplicate is already placed.
    """
    used = csg0 | csg1 | consumed
    found: list[ExpCond] = []
    taken = 0

    def consider(h: str, m: str):
        nonlocal taken
        hb = q.bit[h]
        node = q.nodes[h]
        if hb & (used | taken) or node.pinned:
            return
        if q.bit[q.dup[h]] & (used | taken):
            return
        entry = q.entry[h]
        if not q.bit[entry.src] & csg0:
            return
        found.append(ExpCond(Col(entry.src, entry.attr), node.far_attr, Col(m, q.nodes[m].far_attr), h))
        taken |= hb

    if csg1.bit_count() <= csg0.bit_count():
        for m in q.members(csg1):
            for e in q.partners[m]:
                consider(e.dst if e.src == m else e.src, m)
    else:
        for s in q.members(csg0):
            for e in q.explore_out[s]:
                if not q.nodes[e.dst].is_edge:
                    continue
                for pe in q.partners[e.dst]:
                    m = pe.dst if pe.src == e.dst else pe.src
                    if q.bit[m] & csg1:
                        consider(e.dst, m)
    return found


def _value_edges(q: QueryGraph, csg0: int, csg1: int) -> list[QEdge]:
    small, large = (csg1, csg0) if csg1.bit_count() <= csg0.bit_count() else (csg0, csg1)
    out = []
    for name in q.members(small):
        for e in q.value_at[name]:
            other = e.dst if e.src == name else e.src
            if q.bit[other] & large:
                out.append(e)
    return out


def _explore_edge(q: QueryGraph, csg0: int, csg1: int) -> Optional[QEdge]:
    for side, other in ((csg0, csg1), (csg1, csg0)):
        for name in q.members(side):
            for e in q.explore_out[name]:
                if not q.bit[e.dst] & other:
                    continue
                if (e.src, e.dst) in q.loop_checks:
                    continue
                if (e.src, e.dst) in q.closures and other.bit_count() > 1:
                    continue
                return e
    return None


def resolve_op(q: QueryGraph, csg0: int, csg1: int, consumed: int = 0, intersective: bool = True) -> ResolvedOp:
    """
    Resolves a legal pair: θ = explorative conditions in both directions plus the plain
    value conditions between the sides. An explore edge across the pair makes it an
    Explore carrying θ, otherwise a ValueJoin on θ.
    """
    exp_conds: list[ExpCond] = []
    taken = 0
    if intersective:
        exp_conds = resolve_exp(q, csg0, csg1, consumed)
        taken = q.mask(c.helper for c in exp_conds)
        back = resolve_exp(q, csg1, csg0, consumed | taken)
        exp_conds += back
        taken |= q.mask(c.helper for c in back)
    conds = [e.cond for e in _value_edges(q, csg0, csg1) if e.kind is EdgeKind.VALUE]
    return ResolvedOp(_explore_edge(q, csg0, csg1), conds, exp_conds, taken)
