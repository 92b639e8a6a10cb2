import pytest

from app.core.exceptions import ConfigError, NotFound
from app.graph.stats import GraphStats
from app.models.expressions import Cmp, Col, Const
from app.planner.estimate import (
    EQ_SELECTIVITY,
    NE_SELECTIVITY,
    RANGE_SELECTIVITY,
    Estimator,
    StatsOverride,
    delta_join_card,
    load_override,
    set_key,
)
from app.planner.querygraph import build_query_graph
from app.sqldelta.logical import build_logical
from app.sqldelta.parser import parse


@pytest.fixture
def estimator(social_session):
    sql = "select a.id from g match (a: User)-[e: Share]->(b: Link) where a.name = 'ann'"
    logical = build_logical(parse(sql), social_session.catalog)
    q = build_query_graph(logical, social_session.catalog)
    return Estimator(q, social_session.collect())


# -----------------------
# override files
# -----------------------


def test_load_golden_override(golden_override):
    assert golden_override.default == 1e7
    assert golden_override.base["V.v0"] == 1e3
    assert golden_override.degree["V.v1.in_L"] == 100
    assert golden_override.lookup(["V.v0", "O.e0"]) == 1e4
    assert golden_override.lookup(["V.v1", "V.v0", "R.D", "O.e0"]) == 2e3


def test_lookup_defaults_only_for_sets():
    override = StatsOverride(default=5.0, cardinality={"b, a": 2.0})
    assert override.lookup(["a", "b"]) == 2.0
    assert override.lookup(["a", "c"]) == 5.0
    assert override.lookup(["a"]) is None
    assert StatsOverride().lookup(["a", "c"]) is None


def test_set_key_is_order_free():
    assert set_key(["V.v1", " O.e0", "R.D"]) == "O.e0,R.D,V.v1"


def test_missing_override_file(tmp_path):
    with pytest.raises(NotFound):
        load_override(tmp_path / "nope.toml")


@pytest.mark.parametrize(
    "text",
    [
        "default = [",
        "default = -1",
        '[base]\n"V.v0" = "many"',
    ],
)
def test_invalid_override_file(tmp_path, text):
    path = tmp_path / "stats.toml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_override(path)


# -----------------------
# estimates from statistics
# -----------------------


def test_base_cardinality_uses_label_histogram(estimator):
    assert estimator.base("V.b") == pytest.approx(3.0)
    assert estimator.base("O.e") == pytest.approx(6.0)


def test_attribute_filter_without_distinct_count(estimator):
    assert estimator.base("V.a") == pytest.approx(4.0 * EQ_SELECTIVITY)


def test_degree_prefers_label_statistics(estimator):
    assert estimator.degree("V.a", "out_L") == pytest.approx(2.5)
    assert estimator.degree("V.b", "in_L") == pytest.approx(2.0)
    assert estimator.degree("O.e", "dst_L") == 1.0


def test_selectivity_rules(estimator):
    node = estimator.q.nodes["V.a"]
    col = Col("V.a", "name")
    assert estimator.selectivity(node, Cmp("!=", col, Const("x"))) == NE_SELECTIVITY
    assert estimator.selectivity(node, Cmp("<", col, Const("x"))) == RANGE_SELECTIVITY
    assert estimator.selectivity(node, Cmp("=", col, Const("x"))) == EQ_SELECTIVITY


def test_explore_estimate(estimator):
    card = estimator.explore(["V.a", "O.e"], 10.0, "V.a", "out_L", "O.e", (), ())
    assert card == pytest.approx(10.0 * 2.5 * 0.6)


def test_override_wins_over_statistics(social_session):
    logical = build_logical(parse("select a.id from g match (a)->(b)"), social_session.catalog)
    q = build_query_graph(logical, social_session.catalog)
    override = StatsOverride(base={"V.a": 42.0}, degree={"V.a.out_L": 9.0}, cardinality={"V.a,O._0": 7.0})
    est = Estimator(q, social_session.collect(), override)
    assert est.base("V.a") == 42.0
    assert est.degree("V.a", "out_L") == 9.0
    assert est.explore(["V.a", "O._0"], 1.0, "V.a", "out_L", "O._0", (), ()) == 7.0


def test_unknown_relations_use_defaults(social_session):
    logical = build_logical(parse("select a.id from g match (a)->(b)"), social_session.catalog)
    q = build_query_graph(logical, social_session.catalog)
    est = Estimator(q, GraphStats(), default_cardinality=500.0, default_degree=3.0)
    assert est.base("V.a") == 500.0
    assert est.degree("V.a", "out_L") == 3.0


def test_delta_join_cardinality():
    assert delta_join_card(10, 4) == 4.0
    assert delta_join_card(0, 0) == 0.0
