import random

import networkx as nx
import pytest

from app.exec.executor import Executor
from app.graph.oracle import match_bruteforce
from app.models.schemas import (
    EdgeRecord,
    Pattern,
    PatternEdge,
    PatternQuery,
    PatternVertex,
    PropertyGraph,
    VertexRecord,
)
from app.planner.physical import PhysicalPlan
from app.services.session import Session
from app.sqldelta.logical import build_logical
from app.sqldelta.parser import parse
from tests.helpers import GOLDEN_QUERY, GOLDEN_ROWS, random_graph

ACYCLIC = [
    [("a", "b")],
    [("a", "b"), ("b", "c")],
    [("a", "b"), ("a", "c"), ("a", "d")],
    [("a", "b"), ("b", "c"), ("c", "d"), ("d", "e")],
]
CYCLIC = [
    [("a", "b"), ("b", "a")],
    [("a", "b"), ("b", "c"), ("c", "a")],
    [("a", "b"), ("a", "c"), ("b", "c")],
    [("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")],
    [("a", "b"), ("b", "d"), ("a", "c"), ("c", "d")],
    [("a", "b"), ("b", "c"), ("c", "a"), ("c", "d"), ("d", "a")],
    [("a", "b"), ("b", "c"), ("c", "a"), ("a", "d"), ("d", "e")],
    [("a", "b"), ("a", "b")],
    [("a", "a")],
    [("a", "b"), ("b", "b")],
]
TEMPLATES = ACYCLIC + CYCLIC
SPLIT = [
    [("a", "b"), ("c", "d")],
    [("a", "b"), ("b", "c"), ("d", "e")],
    [("a", "b"), ("b", "a"), ("c", "c")],
    [("a", "a"), ("b", "b")],
]
LABELS = [None, "A", "B", "C", "D"]


def random_query(rng: random.Random, templates=TEMPLATES, labels=LABELS, isolated: int = 0) -> PatternQuery:
    pairs = rng.choice(templates)
    names = sorted({v for pair in pairs for v in pair}) + [f"z{k}" for k in range(isolated)]
    vertices = [PatternVertex(var=v, label=rng.choice(labels)) for v in names]
    edges = [PatternEdge(var=f"e{i}", src=s, dst=d, label=rng.choice(labels)) for i, (s, d) in enumerate(pairs)]
    projection = [(v, "id") for v in names]
    if rng.random() < 0.3:
        projection.append((f"e{rng.randrange(len(edges))}", "w"))
    if rng.random() < 0.3:
        projection.append((rng.choice(names), "w"))
    return PatternQuery(pattern=Pattern(vertices=vertices, edges=edges), projection=projection)


def is_cyclic(query: PatternQuery) -> bool:
    """Whether the pattern, read as an undirected multigraph, has a cycle (self-loops count)."""
    graph = nx.MultiGraph()
    graph.add_nodes_from(v.var for v in query.pattern.vertices)
    graph.add_edges_from((e.src, e.dst) for e in query.pattern.edges)
    return graph.number_of_edges() > graph.number_of_nodes() - nx.number_connected_components(graph)


def to_sql(query: PatternQuery) -> str:
    labels = {v.var: v.label for v in query.pattern.vertices}

    def node(var: str) -> str:
        return f"({var}: {labels[var]})" if labels[var] else f"({var})"

    def edge(e: PatternEdge) -> str:
        inner = f"{e.var}: {e.label}" if e.label else e.var
        return f"{node(e.src)}-[{inner}]->{node(e.dst)}"

    items = ", ".join(f"{var}.{attr} as c{i}" for i, (var, attr) in enumerate(query.projection))
    used = {v for e in query.pattern.edges for v in (e.src, e.dst)}
    paths = [edge(e) for e in query.pattern.edges] + [node(v) for v in labels if v not in used]
    return f"select {items} from g match " + ", ".join(paths)


def graph_session(settings, graph: PropertyGraph) -> Session:
    session = Session(settings)
    session.add_graph("g", graph)
    return session


# -----------------------
# engine against the brute-force matcher
# -----------------------


def trial(seed: int) -> tuple[PropertyGraph, PatternQuery]:
    """Up to 200 vertices and 1000 edges over four labels, self-loops in half the graphs."""
    rng = random.Random(seed)
    graph = random_graph(rng, rng.randint(2, 200), rng.randint(1, 1000), labels="ABCD", loops=rng.random() < 0.5)
    return graph, random_query(rng)


@pytest.mark.parametrize("seed", range(200))
def test_engine_matches_bruteforce(settings, seed):
    graph, query = trial(seed)
    session = graph_session(settings, graph)
    result = session.query(to_sql(query))
    assert sorted(result.rows) == sorted(match_bruteforce(query, graph))


def test_trials_are_mostly_cyclic():
    cyclic = sum(is_cyclic(trial(seed)[1]) for seed in range(200))
    assert cyclic >= 0.4 * 200


@pytest.mark.parametrize("seed", range(50))
def test_split_patterns_match_bruteforce(settings, seed):
    """Self-loops, components without a shared vertex and isolated vertices."""
    rng = random.Random(5000 + seed)
    graph = random_graph(rng, rng.randint(2, 12), rng.randint(1, 30), labels="AB", loops=True)
    query = random_query(rng, SPLIT + [[("a", "a")], [("a", "b"), ("b", "b")]], [None, "A", "B"], isolated=seed % 2)
    session = graph_session(settings, graph)
    for flag in ("on", "off"):
        session.set_option("optimizer", flag)
        result = session.query(to_sql(query))
        assert sorted(result.rows) == sorted(match_bruteforce(query, graph))


def test_self_loops_are_matched_once_each(settings):
    graph = PropertyGraph(
        vertices=[VertexRecord(vid=v, label="A") for v in range(3)],
        edges=[
            EdgeRecord(eid=eid, src=s, dst=d, label="A")
            for eid, (s, d) in enumerate([(0, 0), (0, 0), (1, 1), (1, 2)], start=1)
        ],
    )
    session = graph_session(settings, graph)
    rows = session.query("select a.id, e.id from g match (a)-[e]->(a)").rows
    assert sorted(rows) == [(0, 1), (0, 2), (1, 3)]
    rows = session.query("select a.id, b.id from g match (a)->(b), (b)-[l]->(b)").rows
    assert sorted(rows) == [(0, 0), (0, 0), (0, 0), (0, 0), (1, 1)]


def test_disconnected_pattern_is_a_cross_product(settings):
    graph = PropertyGraph(
        vertices=[VertexRecord(vid=v, label="A") for v in range(4)],
        edges=[EdgeRecord(eid=1, src=0, dst=1, label="A"), EdgeRecord(eid=2, src=2, dst=3, label="A")],
    )
    session = graph_session(settings, graph)
    rows = session.query("select a.id, c.id, x.id from g match (a)->(b), (c)->(d), (x)").rows
    assert len(rows) == 2 * 2 * 4
    assert sorted({r[:2] for r in rows}) == [(0, 0), (0, 2), (2, 0), (2, 2)]


def test_parallel_edges_are_separate_matches(settings):
    graph = PropertyGraph(
        vertices=[VertexRecord(vid=v, label="A") for v in range(3)],
        edges=[
            EdgeRecord(eid=eid, src=s, dst=d, label="A")
            for eid, (s, d) in enumerate([(0, 1), (0, 1), (1, 2), (2, 0)], start=1)
        ],
    )
    session = graph_session(settings, graph)
    rows = session.query("select a.id, b.id, c.id from g match (a)->(b)->(c)->(a)").rows
    assert sorted(rows) == [(0, 1, 2), (0, 1, 2), (1, 2, 0), (1, 2, 0), (2, 0, 1), (2, 0, 1)]


@pytest.mark.parametrize("flag", ["hash_ops", "intersective", "optimizer"])
def test_planner_switches_keep_results(settings, flag):
    rng = random.Random(99)
    graph = random_graph(rng, 20, 60, labels="AB")
    session = graph_session(settings, graph)
    for _ in range(10):
        query = random_query(rng, labels=[None, "A", "B"])
        sql = to_sql(query)
        session.set_option(flag, "on")
        on = sorted(session.query(sql).rows)
        session.set_option(flag, "off")
        off = sorted(session.query(sql).rows)
        assert on == off == sorted(match_bruteforce(query, graph))


# -----------------------
# every legal plan returns the same bag
# -----------------------


PLAN_CAP = 20_000
SMALL = [ACYCLIC[0], ACYCLIC[1], CYCLIC[0], CYCLIC[8], CYCLIC[9]]
TRIANGLES = [CYCLIC[1], CYCLIC[2]]


def assert_all_plans_agree(settings, seed: int, templates: list, intersective: str):
    rng = random.Random(1000 + seed)
    graph = random_graph(rng, rng.randint(4, 15), rng.randint(5, 30), labels="AB", loops=True)
    query = random_query(rng, templates, [None, "A", "B"])
    session = graph_session(settings, graph)
    session.set_option("intersective", intersective)
    search = session.planner().search(build_logical(parse(to_sql(query)), session.catalog))
    expected = sorted(match_bruteforce(query, graph))
    executor = Executor(session.store, session.graphs, 5)
    plans = search.enumerate_plans(limit=PLAN_CAP)
    assert 0 < len(plans) < PLAN_CAP
    for root in plans:
        assert sorted(executor.execute(PhysicalPlan(root, search.q)).rows) == expected


@pytest.mark.parametrize("intersective", ["on", "off"])
@pytest.mark.parametrize("seed", range(20))
def test_plan_invariance(settings, seed, intersective):
    assert_all_plans_agree(settings, seed, SMALL, intersective)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_plan_invariance_on_triangles(settings, seed):
    assert_all_plans_agree(settings, seed, TRIANGLES, "on")


def test_golden_plans_agree(social_session):
    search = social_session.planner().search(build_logical(parse(GOLDEN_QUERY), social_session.catalog))
    executor = Executor(social_session.store, social_session.graphs)
    for root in search.enumerate_plans(limit=60):
        assert sorted(executor.execute(PhysicalPlan(root, search.q)).rows) == GOLDEN_ROWS


# -----------------------
# hybrid queries
# -----------------------


@pytest.mark.parametrize("size", [1, 7, 2048])
def test_chunk_size_does_not_change_results(social_session, size):
    plan = social_session.compile(GOLDEN_QUERY)
    result = Executor(social_session.store, social_session.graphs, size).execute(plan)
    assert sorted(result.rows) == GOLDEN_ROWS


def test_golden_query_with_override(social_session, golden_override):
    social_session.override = golden_override
    plan = social_session.compile(GOLDEN_QUERY)
    assert plan.cost == pytest.approx(116400)
    assert sorted(social_session.query(GOLDEN_QUERY).rows) == GOLDEN_ROWS


def test_where_clause_over_pattern_and_relation(social_session):
    sql = (
        "select * from (select a.id as x, b.id as y from g match (a: User)-[e: Follow]->(b: User) "
        "where e.weight > 0) as P join D on P.y = D.uid where D.city != 'oslo'"
    )
    rows = social_session.query(sql).rows
    assert sorted(r[:2] for r in rows) == [(1, 2), (3, 1), (4, 1)]


def test_fuzzy_map(session, fixtures_dir):
    session.load_table("L", str(fixtures_dir / "titles_left.csv"))
    session.load_table("R", str(fixtures_dir / "titles_right.csv"))
    result = session.query("select * from L map R using fuzzy(title ~ title2)")
    assert result.columns == ["lid", "title", "title2"]
    assert [r[0] for r in sorted(result.rows)] == [1, 2, 4, 5, 8, 10]


def test_fuzzy_threshold_in_query(session, fixtures_dir):
    session.load_table("L", str(fixtures_dir / "titles_left.csv"))
    session.load_table("R", str(fixtures_dir / "titles_right.csv"))
    result = session.query("select lid from L map R using fuzzy(title ~ title2, 0.75)")
    assert sorted(r[0] for r in result.rows) == [1, 2, 4, 5, 8, 9, 10]
