"""
Connected-subgraph / connected-complement enumeration (DPccp order) over the explore and
value edges of a query graph, explore edges taken as undirected and duplicate edges
ignored.
"""

from dataclasses import dataclass
from typing import Iterator

from app.planner.querygraph import QEdge, QueryGraph


@dataclass(frozen=True)
class CsgCmpPair:
    csg0: frozenset
    csg1: frozenset
    edges: tuple[QEdge, ...]


def _subsets(mask: int) -> Iterator[int]:
    """Non-empty subsets of `mask`, smallest first."""
    subsets = []
    sub = mask
    while sub:
        subsets.append(sub)
        sub = (sub - 1) & mask
    subsets.sort(key=lambda s: (bin(s).count("1"), s))
    return iter(subsets)


def _below(i: int) -> int:
    """Bitmask of node indexes <= i."""
    return (1 << (i + 1)) - 1


def enumerate_mask_pairs(q: QueryGraph, left_deep: bool = False) -> Iterator[tuple[int, int]]:
    """
    CSG-CMP pairs as bitmasks, each unordered pair once, the side holding the lowest
    node index first.

    With `left_deep` only pairs with a single-node side are emitted, and node sets
    holding both nodes of a duplicate pair are never grown: such sets cannot carry a
    left-deep plan state.
    """
    n = len(q.names)
    dup_masks = [q.bit[a] | q.bit[b] for a, b in q.dup_pairs] if left_deep else []

    def grows(s: int) -> bool:
        return all(s & m != m for m in dup_masks)

    def emit_csg(s1: int):
        low = (s1 & -s1).bit_length() - 1
        x = s1 | _below(low)
        neighbors = q.neighborhood(s1) & ~x
        for v in sorted((i for i in range(n) if neighbors >> i & 1), reverse=True):
            s2 = 1 << v
            yield s1, s2
            if not left_deep or s1 & (s1 - 1) == 0:
                yield from enumerate_cmp_rec(s1, s2, x | (_below(v) & neighbors))

    def enumerate_csg_rec(s1: int, x: int):
        neighbors = q.neighborhood(s1) & ~x
        grown = [s1 | sub for sub in _subsets(neighbors) if grows(s1 | sub)]
        for s in grown:
            yield from emit_csg(s)
        for s in grown:
            yield from enumerate_csg_rec(s, x | neighbors)

    def enumerate_cmp_rec(s1: int, s2: int, x: int):
        neighbors = q.neighborhood(s2) & ~x
        grown = [s2 | sub for sub in _subsets(neighbors) if grows(s2 | sub)]
        for s in grown:
            yield s1, s
        for s in grown:
            yield from enumerate_cmp_rec(s1, s, x | neighbors)

    for i in reversed(range(n)):
        start = 1 << i
        yield from emit_csg(start)
        yield from enumerate_csg_rec(start, _below(i))


def enumerate_pairs(q: QueryGraph) -> Iterator[CsgCmpPair]:
    """
    Every unordered pair of disjoint connected node sets joined by at least one explore
    or value edge, each emitted once.
    """
    for s1, s2 in enumerate_mask_pairs(q):
        yield CsgCmpPair(
            frozenset(q.members(s1)), frozenset(q.members(s2)), tuple(q.edges_between(s1, s2))
        )
