from concurrent.futures import ThreadPoolExecutor

import pytest

from app.core.exceptions import BindError
from app.models.expressions import Col, ExpCond
from app.models.schemas import PropertyGraph, VertexRecord
from app.sqldelta.logical import Binder, LExplore, LScan, LValueJoin, NodeKind, build_logical, closure_cond
from app.sqldelta.parser import parse
from tests.helpers import GOLDEN_QUERY


def bind(session, sql):
    return build_logical(parse(sql), session.catalog)


def test_golden_query_nodes(social_session):
    plan = bind(social_session, GOLDEN_QUERY)
    assert sorted(plan.nodes) == [
        "I.e0",
        "I.e1",
        "I.e2",
        "O.e0",
        "O.e1",
        "O.e2",
        "R.D",
        "V.v0",
        "V.v1",
        "V.v2",
    ]
    assert plan.nodes["O.e1"].kind is NodeKind.OUT
    assert plan.nodes["I.e1"].relation == "g.E_in"
    assert plan.nodes["R.D"].columns == ("uid", "city")
    assert [o.name for o in plan.outputs] == ["vid0", "vid2", "uid", "city"]
    assert len(plan.value_conds) == 1
    assert plan.residual == []


def test_label_filters_attach_to_nodes(social_session):
    plan = bind(social_session, GOLDEN_QUERY)
    assert plan.nodes["V.v1"].describe_filter() == "V.v1.label = 'Link'"
    assert plan.nodes["O.e2"].label == "Follow"
    assert plan.nodes["I.e2"].label == "Follow"


def test_canonical_plan_checks_every_edge_once(social_session):
    plan = bind(social_session, GOLDEN_QUERY)
    assert plan.topology_checks() == {0: 1, 1: 1, 2: 1}
    assert plan.leaf_order() == ["V.v2", "O.e2", "V.v0", "O.e1", "V.v1", "R.D"]


def test_closing_edge_becomes_explorative_condition(social_session):
    plan = bind(social_session, "select * from g match (a)->(b), (b)->(c), (a)->(c)")
    conds = [c for op in plan.walk() if isinstance(op, LExplore) for c in op.exp_conds]
    assert len(conds) == 1
    assert isinstance(conds[0], ExpCond)


def test_projected_edge_is_pinned(social_session):
    plan = bind(social_session, "select e.weight from g match (a)-[e]->(b), (b)->(a)")
    (link,) = [ln for ln in plan.links if ln.var == "e"]
    assert link.pinned
    assert plan.nodes[link.out_node].pinned


def test_edge_predicate_filters_both_edge_nodes(social_session):
    plan = bind(social_session, "select a.id from g match (a)-[e]->(b) where e.weight > 5")
    assert plan.nodes["O.e"].describe_filter() == "O.e.weight > 5"
    assert plan.nodes["I.e"].describe_filter() == "I.e.weight > 5"


def test_single_vertex_pattern(social_session):
    plan = bind(social_session, "select a.id match (a: Link)")
    assert isinstance(plan.root.child, LScan)
    assert plan.links == []


def test_self_loop_is_explored_and_closed_on_its_vertex(social_session):
    plan = bind(social_session, "select a.id from g match (a)-[e]->(a)")
    (explore,) = [op for op in plan.walk() if isinstance(op, LExplore)]
    assert (explore.source, explore.attr, explore.target) == ("V.a", "out_L", "O.e")
    assert explore.conds == [closure_cond("O.e", "dst_L", "V.a")]
    assert plan.topology_checks() == {0: 1}


def test_disconnected_pattern_joins_components(social_session):
    plan = bind(social_session, "select a.id, c.id, x.id from g match (a)->(b), (c)->(d), (x)")
    joins = [op for op in plan.walk() if isinstance(op, LValueJoin)]
    assert len(joins) == 2
    assert all(op.conds == [] for op in joins)
    assert plan.leaf_order()[0] == "V.a"
    assert {"V.c", "V.x"} <= set(plan.leaf_order())


def test_same_variable_in_two_levels_gets_qualified_name(social_session):
    sql = (
        "select * from (select a.id as x from g match (a)->(b)) as P "
        "join (select a.id as y from g match (a)->(b)) as Q on P.x = Q.y"
    )
    plan = bind(social_session, sql)
    assert {"V.a", "V.Q.a", "V.b", "V.Q.b"} <= set(plan.nodes)


def test_unqualified_vertex_name_is_its_id(social_session):
    plan = bind(social_session, "select a from g match (a)->(b)")
    assert plan.outputs[0].expr == Col("V.a", "vid")


@pytest.mark.parametrize(
    "sql, message",
    [
        ("select * from h match (a)->(b)", "unknown graph h"),
        ("select x.id from g match (a)->(b)", "unknown alias x"),
        ("select a.age from g match (a)->(b)", "unknown attribute"),
        ("select nope from D", "unknown column nope"),
        ("select * from g", "only be queried with a match"),
        ("select * from Q", "unknown relation Q"),
        ("select * from g match (a: User)->(b), (a: Link)->(b)", "conflicting labels"),
        ("select * from g match (a)-[a]->(b)", "both a vertex and an edge"),
        ("select * from g match (a)-[e]->(b), (b)-[e]->(c)", "declared twice"),
        ("select * from D join D on D.uid = D.uid", "used twice"),
        ("select 1", "needs a from clause"),
    ],
)
def test_bind_errors(social_session, sql, message):
    with pytest.raises(BindError, match=message):
        bind(social_session, sql)


def test_match_needs_graph_name_with_two_graphs(social_session):
    social_session.add_graph("h", PropertyGraph(vertices=[VertexRecord(vid=1, label="A")]))
    with pytest.raises(BindError, match="needs a graph name"):
        bind(social_session, "select a.id match (a)")


def test_map_without_using_needs_same_named_column(social_session):
    social_session.add_table("T", ["rid", "name"], [(1, "x")])
    with pytest.raises(BindError, match="left column named rid"):
        bind(social_session, "select * from D map T")


def test_map_binds_matcher_columns(social_session):
    social_session.add_table("T", ["rid", "town"], [(1, "paris")])
    plan = bind(social_session, "select * from D map T using fuzzy(city ~ town)")
    (derived,) = [n for n in plan.nodes.values() if n.kind is NodeKind.DERIVED]
    matcher = derived.payload.matcher
    assert (matcher.kind, matcher.left, matcher.right, matcher.a0) == ("fuzzy", "D.city", "T.town", "T.rid")
    assert matcher.threshold == 0.8
    assert derived.columns == ("D.uid", "D.city", "T.town")
    assert [o.name for o in plan.outputs] == ["uid", "city", "town"]


# -----------------------
# naming
# -----------------------


def test_name_falls_back_to_numbered_alias(social_session):
    binder = Binder(social_session.catalog)
    assert binder._name(("V",), "a", None) == "a"
    binder.nodes["V.a"] = None
    assert binder._name(("V", "O"), "a", "P") == "P.a"
    binder.nodes["O.P.a"] = None
    binder.nodes["V.P1.a"] = None
    assert binder._name(("V", "O"), "a", "P") == "P2.a"


def test_two_relation_query_binds_promptly(social_session):
    social_session.add_table("T", ["rid", "town"], [(1, "paris")])
    sql = "select D.uid, T.town from D join T on D.uid = T.rid"
    pool = ThreadPoolExecutor(max_workers=1)
    try:
        plan = pool.submit(bind, social_session, sql).result(timeout=5)
    finally:
        pool.shutdown(wait=False)
    assert {"R.D", "R.T"} <= set(plan.nodes)
