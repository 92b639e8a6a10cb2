import pytest

from app.graph.stats import GraphStats
from app.models.schemas import CostParams
from app.planner.cost import annotate_costs, cost_emm, step_cost
from app.planner.enumerate import enumerate_mask_pairs, enumerate_pairs
from app.planner.explain import explain
from app.planner.legality import is_legal_pair
from app.planner.optimizer import Planner, PlannerOptions
from app.planner.physical import EXPLORE_KINDS, OpKind, PhysicalOp
from app.planner.querygraph import EdgeKind, build_query_graph
from app.sqldelta.logical import build_logical
from app.sqldelta.parser import parse
from tests.helpers import GOLDEN_QUERY

RELATIONAL_FIRST = ["R.D", "V.v0", "O.e0", "V.v1", "I.e1", "V.v2"]
GRAPH_FIRST = ["V.v2", "O.e1", "V.v1", "O.e2", "V.v0", "R.D"]
GOLDEN_SHAPE = [
    ("Scan", "V.v0"),
    ("ExploreNL", "O.e0"),
    ("ExploreNL", "V.v1"),
    ("HashJoin", "R.D"),
    ("IxExploreHash", "I.e1"),
    ("ExploreNL", "V.v2"),
    ("Project", None),
]


@pytest.fixture
def golden_logical(social_session):
    return build_logical(parse(GOLDEN_QUERY), social_session.catalog)


@pytest.fixture
def golden_graph(social_session, golden_logical):
    return build_query_graph(golden_logical, social_session.catalog)


def golden_planner(session, override, **options):
    return Planner(session.catalog, GraphStats(), CostParams(tau=0.2), PlannerOptions(**options), override)


# -----------------------
# query graph
# -----------------------


def test_golden_query_graph(golden_graph):
    q = golden_graph
    assert len(q.names) == 10
    assert sorted(q.dup_pairs) == [("O.e0", "I.e0"), ("O.e1", "I.e1"), ("O.e2", "I.e2")]
    explore = [(e.src, e.attr, e.dst) for e in q.edges if e.kind is EdgeKind.EXPLORE]
    assert ("V.v0", "out_L", "O.e0") in explore
    assert ("I.e1", "src_L", "V.v2") in explore
    same_pointer = {(e.src, e.dst) for e in q.edges if e.same_pointer}
    assert same_pointer == {("O.e0", "O.e1"), ("I.e1", "I.e2"), ("I.e0", "O.e2")}
    assert not q.closures
    assert q.mandatory == q.mask(["R.D", "V.v0", "V.v1", "V.v2"])


def test_pinned_edges_get_closing_conditions(social_session):
    logical = build_logical(parse("select e.weight from g match (a)-[e]->(b)"), social_session.catalog)
    q = build_query_graph(logical, social_session.catalog)
    assert ("O.e", "V.b") in q.closures
    assert ("I.e", "V.a") in q.closures


def test_non_intersective_graph_closes_every_edge(social_session, golden_logical):
    q = build_query_graph(golden_logical, social_session.catalog, intersective=False)
    assert len(q.closures) == 12


def test_disconnected_components_get_true_edge(social_session):
    sql = "select * from (select a.id as x from g match (a)->(b)) as P join D on true = true"
    logical = build_logical(parse(sql), social_session.catalog)
    q = build_query_graph(logical, social_session.catalog)
    assert q.is_connected(q.full)


def test_dump_lists_nodes_then_edges(golden_graph):
    lines = golden_graph.dump().splitlines()
    assert lines[0].startswith("NODE I.e0")
    assert any(line.startswith("EDGE explore out_L {V.v0}→{O.e0}") for line in lines)
    assert lines[-1].startswith("EDGE duplicate")


# -----------------------
# pair enumeration and legality
# -----------------------


def _connected_pairs(q):
    found = set()
    full = q.full
    for s1 in range(1, full + 1):
        if not q.is_connected(s1):
            continue
        rest = full & ~s1
        s2 = rest
        while s2:
            if q.is_connected(s2) and q.neighborhood(s1) & s2:
                found.add(frozenset([frozenset(q.members(s1)), frozenset(q.members(s2))]))
            s2 = (s2 - 1) & rest
    return found


def test_enumerate_pairs_emits_each_connected_pair_once(golden_graph):
    pairs = list(enumerate_pairs(golden_graph))
    keys = [frozenset([p.csg0, p.csg1]) for p in pairs]
    assert len(keys) == len(set(keys))
    assert set(keys) == _connected_pairs(golden_graph)
    for p in pairs:
        assert not p.csg0 & p.csg1
        assert p.edges
        assert all(e.kind is not EdgeKind.DUPLICATE for e in p.edges)


def test_left_deep_pairs_have_a_single_node_side(golden_graph):
    q = golden_graph
    pairs = list(enumerate_mask_pairs(q, left_deep=True))
    assert len(pairs) == len(set(pairs))
    for s1, s2 in pairs:
        assert s1.bit_count() == 1 or s2.bit_count() == 1
        for a, b in q.dup_pairs:
            dup = q.bit[a] | q.bit[b]
            assert s1 & dup != dup and s2 & dup != dup


def test_search_steps_cover_every_neighbour(social_session, golden_override, golden_logical):
    search = golden_planner(social_session, golden_override).search(golden_logical)
    q = search.q
    dups = [q.bit[a] | q.bit[b] for a, b in q.dup_pairs]
    checked = 0
    for s in range(1, q.full + 1):
        if not q.is_connected(s) or any(s & m == m for m in dups):
            continue
        assert search.expansions.get(s, 0) == q.neighborhood(s)
        checked += 1
    assert checked == len(search.expansions)


@pytest.mark.parametrize(
    "left, right, legal",
    [
        ({"V.v0"}, {"O.e0"}, True),
        ({"O.e0"}, {"I.e0"}, False),
        ({"V.v0"}, {"O.e0", "V.v1"}, False),
        ({"V.v0", "V.v1"}, {"O.e0"}, False),
        ({"V.v0", "O.e0"}, {"V.v1"}, True),
        ({"V.v0", "O.e0", "V.v1"}, {"R.D"}, True),
        ({"V.v0", "O.e0", "I.e0"}, {"V.v1"}, False),
    ],
)
def test_legality(golden_graph, left, right, legal):
    assert is_legal_pair(golden_graph, left, right) is legal
    assert is_legal_pair(golden_graph, right, left) is legal


def test_every_plan_step_is_a_legal_pair(social_session, golden_override, golden_logical):
    search = golden_planner(social_session, golden_override).search(golden_logical)
    q = search.q
    for root in search.enumerate_plans(limit=50):
        for op in root.walk():
            if op.kind in EXPLORE_KINDS or op.kind in (OpKind.HASH_JOIN, OpKind.NL_JOIN):
                left = set(op.child.visible)
                assert is_legal_pair(q, left, {op.node})


# -----------------------
# cost model
# -----------------------


def test_step_costs():
    params = CostParams(tau=0.5, kappa=2.0)
    scan = PhysicalOp(OpKind.SCAN, node="a", est_card=100)
    other = PhysicalOp(OpKind.SCAN, node="b", est_card=10)
    assert step_cost(scan, params) == 50
    explore = PhysicalOp(OpKind.EXPLORE_NL, child=scan, est_card=300, ref_card=400)
    assert step_cost(explore, params) == 200
    explore_hash = PhysicalOp(OpKind.EXPLORE_HASH, child=scan, est_card=300, ref_card=400)
    assert step_cost(explore_hash, params) == 500
    nl = PhysicalOp(OpKind.NL_JOIN, child=scan, right=other, est_card=30, cond_cards=(40,))
    assert step_cost(nl, params) == 1000 + 20
    hash_join = PhysicalOp(OpKind.HASH_JOIN, child=scan, right=other, est_card=30)
    assert step_cost(hash_join, params) == 30
    ix = PhysicalOp(OpKind.IX_EXPLORE_NL, child=scan, est_card=30, ref_card=400, cond_cards=(200,))
    assert step_cost(ix, params) == pytest.approx(0.5 * 400 * 0.5 * 200 / 100)
    delta = PhysicalOp(OpKind.DELTA_JOIN, child=scan, right=other, est_card=10)
    assert step_cost(delta, params) == 2000
    assert cost_emm(nl, params) == 50 + 5 + 1020
    assert annotate_costs(nl, params) == nl.cum_cost == scan.cum_cost + other.cum_cost + 1020


def test_scan_of_derived_node_pays_for_its_subplan():
    params = CostParams(tau=1.0)
    sub = PhysicalOp(OpKind.SCAN, node="x", est_card=7)
    scan = PhysicalOp(OpKind.SCAN, node="M.0", est_card=3, subplan=sub)
    assert step_cost(scan, params) == 10


# -----------------------
# golden plans
# -----------------------


def test_optimizer_finds_golden_plan(social_session, golden_override, golden_logical):
    plan = golden_planner(social_session, golden_override).plan(golden_logical)
    assert plan.cost == pytest.approx(116400)
    assert plan.shape() == GOLDEN_SHAPE
    assert plan.columns == ["vid0", "vid2", "uid", "city"]


def test_golden_plan_consumes_one_edge_node(social_session, golden_override, golden_logical):
    plan = golden_planner(social_session, golden_override).plan(golden_logical)
    (ix,) = [op for op in plan.operators() if op.kind is OpKind.IX_EXPLORE_HASH]
    assert len(ix.exp_conds) == 1
    assert len(ix.consumed) == 1


@pytest.mark.parametrize("order, cost", [(RELATIONAL_FIRST, 342400), (GRAPH_FIRST, 433000)])
def test_fixed_orders(social_session, golden_override, golden_logical, order, cost):
    search = golden_planner(social_session, golden_override).search(golden_logical)
    root = search.left_deep(order)
    assert root.cum_cost == pytest.approx(cost)
    assert root.cum_cost > 116400


def test_explain_shows_estimates(social_session, golden_override, golden_logical):
    text = explain(golden_planner(social_session, golden_override).plan(golden_logical))
    first = text.splitlines()[0]
    assert first.startswith("Project [vid0, vid2, uid, city]")
    assert first.endswith("cum_cost=116400.0")
    assert "  Scan V.v0 (g.V)" in text


def test_optimum_is_no_worse_than_any_plan(social_session, golden_override, golden_logical):
    search = golden_planner(social_session, golden_override).search(golden_logical)
    best = search.optimize().cum_cost
    plans = search.enumerate_plans(limit=200)
    assert len(plans) > 1
    assert all(p.cum_cost >= best - 1e-6 for p in plans)


def test_real_statistics_agree_with_override(social_session, golden_override, golden_logical):
    planner = Planner(
        social_session.catalog,
        social_session.collect(),
        CostParams(tau=0.2),
        PlannerOptions(),
        golden_override,
    )
    assert planner.plan(golden_logical).cost == pytest.approx(116400)


def test_optimizer_off_uses_canonical_order(social_session, golden_override, golden_logical):
    planner = golden_planner(social_session, golden_override, optimizer=False)
    plan = planner.plan(golden_logical)
    assert plan.shape()[0] == ("Scan", "V.v2")
    assert plan.cost >= 116400


def test_hash_operators_can_be_disabled(social_session, golden_override, golden_logical):
    plan = golden_planner(social_session, golden_override, hash_ops=False).plan(golden_logical)
    kinds = {op.kind for op in plan.operators()}
    assert not kinds & {OpKind.HASH_JOIN, OpKind.EXPLORE_HASH, OpKind.IX_EXPLORE_HASH}
    assert plan.cost >= 116400


def test_non_intersective_plans_use_no_explorative_conditions(social_session, golden_override, golden_logical):
    plan = golden_planner(social_session, golden_override, intersective=False).plan(golden_logical)
    assert all(not op.exp_conds for op in plan.operators())
    assert not {op.kind for op in plan.operators()} & {OpKind.IX_EXPLORE_NL, OpKind.IX_EXPLORE_HASH}


def test_candidate_nodes_are_optional(social_session, golden_logical):
    planner = Planner(social_session.catalog, social_session.collect(), options=PlannerOptions(candidates=True))
    search = planner.search(golden_logical)
    assert {"C.v0", "C.v1", "C.v2"} <= set(search.q.nodes)
    assert search.q.nodes["C.v0"].payload == [1, 2, 3]
    assert search.q.nodes["C.v1"].payload == [10, 11, 12]
    assert not search.q.mask(["C.v0"]) & search.q.mandatory
    planner.plan(golden_logical)
