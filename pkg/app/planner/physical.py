from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterator, Optional

from app.planner.querygraph import QueryGraph


class OpKind(str, Enum):
    SCAN = "Scan"
    FILTER = "Filter"
    HASH_JOIN = "HashJoin"
    NL_JOIN = "NlJoin"
    EXPLORE_NL = "ExploreNL"
    EXPLORE_HASH = "ExploreHash"
    IX_EXPLORE_NL = "IxExploreNL"
    IX_EXPLORE_HASH = "IxExploreHash"
    DELTA_JOIN = "DeltaJoin"
    PROJECT = "Project"


EXPLORE_KINDS = (OpKind.EXPLORE_NL, OpKind.EXPLORE_HASH, OpKind.IX_EXPLORE_NL, OpKind.IX_EXPLORE_HASH)
JOIN_KINDS = (OpKind.HASH_JOIN, OpKind.NL_JOIN)


@dataclass
class PhysicalOp:
    """
    One operator of a left-deep physical plan. `visible` lists the nodes whose columns
    the operator's rows carry, in row order; `consumed` the condition-only nodes it
    checks through explorative conditions.
    """

    kind: OpKind
    child: Optional["PhysicalOp"] = None
    right: Optional["PhysicalOp"] = None
    node: Optional[str] = None
    source: Optional[str] = None
    attr: Optional[str] = None
    conds: tuple = ()
    exp_conds: tuple = ()
    consumed: tuple[str, ...] = ()
    visible: tuple[str, ...] = ()
    est_card: float = 0.0
    ref_card: float = 0.0
    cond_cards: tuple[float, ...] = ()
    cum_cost: float = 0.0
    outputs: tuple = ()
    matcher: Any = None
    subplan: Optional["PhysicalOp"] = None
    sides: tuple = ()

    def children(self) -> list["PhysicalOp"]:
        return [c for c in (self.child, self.right) if c is not None]

    def walk(self) -> Iterator["PhysicalOp"]:
        yield self
        for c in self.children():
            yield from c.walk()

    @property
    def is_explore(self) -> bool:
        return self.kind in EXPLORE_KINDS


@dataclass
class PhysicalPlan:
    root: PhysicalOp
    graph: QueryGraph

    @property
    def cost(self) -> float:
        return self.root.cum_cost

    @property
    def columns(self) -> list[str]:
        return [o.name for o in self.graph.outputs]

    def operators(self) -> list[PhysicalOp]:
        return list(self.root.walk())

    def shape(self) -> list[tuple[str, Optional[str]]]:
        """(operator, introduced node) pairs, bottom-up along the left spine."""
        spine = []
        op = self.root
        while op is not None:
            spine.append((op.kind.value, op.node))
            op = op.child
        return list(reversed(spine))
