from typing import Iterable, Optional

from app.planner.querygraph import QEdge, QueryGraph


def crossing_explore(q: QueryGraph, left: int, right: int) -> list[QEdge]:
    """Explore edges leading from one side into the other."""
    out = []
    for side, other in ((left, right), (right, left)):
        for name in q.members(side):
            for e in q.explore_out[name]:
                if q.bit[e.dst] & other:
                    out.append(e)
    return out


def is_legal_mask(q: QueryGraph, left: int, right: int, dup_pairs: Optional[Iterable[tuple[str, str]]] = None) -> bool:
    pairs = q.dup_pairs if dup_pairs is None else dup_pairs
    for a, b in pairs:
        ba, bb = q.bit[a], q.bit[b]
        if (ba & left and bb & right) or (ba & right and bb & left):
            return False
    explore = None
    for e in crossing_explore(q, left, right):
        dst_side = left if q.bit[e.dst] & left else right
        if (e.src, e.dst) in q.loop_checks:
            continue
        # a closing edge into an intermediate result only checks its far ref
        if (e.src, e.dst) in q.closures and dst_side.bit_count() > 1:
            continue
        if explore is not None:
            return False
        explore = e
    if explore is None:
        return True
    dst_side = left if q.bit[explore.dst] & left else right
    return dst_side.bit_count() == 1


def is_legal_pair(q: QueryGraph, csg0: Iterable[str], csg1: Iterable[str], dup_pairs: Optional[Iterable[tuple[str, str]]] = None) -> bool:
    """
    Whether a CSG-CMP pair can become one operator: no duplicate pair is split across
    the sides, at most one explore edge crosses, and that edge leads into a single
    base node rather than into an intermediate result.
    """
    return is_legal_mask(q, q.mask(csg0), q.mask(csg1), dup_pairs)
