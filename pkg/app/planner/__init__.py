from app.planner.cost import cost_emm
from app.planner.enumerate import CsgCmpPair, enumerate_pairs
from app.planner.estimate import Estimator, StatsOverride, load_override
from app.planner.explain import explain
from app.planner.legality import is_legal_pair
from app.planner.optimizer import Planner, PlannerOptions, PlanSearch, optimize, plan_left_deep
from app.planner.physical import OpKind, PhysicalOp, PhysicalPlan
from app.planner.querygraph import QueryGraph, build_query_graph
from app.planner.resolve import resolve_exp, resolve_op

__all__ = [
    "CsgCmpPair",
    "Estimator",
    "OpKind",
    "PhysicalOp",
    "PhysicalPlan",
    "PlanSearch",
    "Planner",
    "PlannerOptions",
    "QueryGraph",
    "StatsOverride",
    "build_query_graph",
    "cost_emm",
    "enumerate_pairs",
    "explain",
    "is_legal_pair",
    "load_override",
    "optimize",
    "plan_left_deep",
    "resolve_exp",
    "resolve_op",
]
