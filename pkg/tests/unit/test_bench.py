import pytest

from app.core.config import Settings
from app.core.exceptions import ConfigError
from app.models.schemas import FragmentStrategy
from app.services.bench import (
    BenchService,
    memory_counters,
    power_law_graph,
    preferential_delta,
    star_graph,
    uniform_graph,
)


@pytest.fixture
def small_settings():
    return Settings(_env_file=None, BENCH_TRIANGLE_EDGES=200, BENCH_REPEAT=1)


def test_unknown_preset(small_settings):
    with pytest.raises(ConfigError, match="unknown bench preset"):
        BenchService(small_settings).run("tpch")


# -----------------------
# generators
# -----------------------


def test_star_graph_has_one_hub():
    graph = star_graph(5)
    assert len(graph.vertices) == 6
    assert {(e.src, e.dst) for e in graph.edges} == {(0, i) for i in range(1, 6)}


def test_power_law_out_degrees():
    graph = power_law_graph(50, seed=1)
    out = {}
    for e in graph.edges:
        out[e.src] = out.get(e.src, 0) + 1
        assert e.src != e.dst
    assert out[0] == 50
    assert out[1] == 12
    assert out[7] == 1


def test_uniform_graph_is_seeded():
    first = uniform_graph(30, 100, seed=3)
    assert len(first.edges) == 100
    assert first == uniform_graph(30, 100, seed=3)


def test_preferential_delta_follows_existing_sources():
    graph = power_law_graph(200, seed=2)
    delta = preferential_delta(graph, 0.01, seed=2)
    assert len(delta.add_edges) == round(len(graph.edges) * 0.01)
    sources = {e.src for e in graph.edges}
    assert all(e.src in sources for e in delta.add_edges)
    assert min(e.eid for e in delta.add_edges) == len(graph.edges)


# -----------------------
# storage counters
# -----------------------


def test_memory_counters_per_strategy():
    settings = Settings(_env_file=None, BLOCK_SIZE=4096, SEGMENT_THRESHOLD=1024)
    graph = star_graph(500)
    delta = preferential_delta(graph, 0.01, seed=5)
    counters = {s: memory_counters(graph, delta, settings, s) for s in FragmentStrategy}
    for values in counters.values():
        assert values["reserved_bytes"] >= values["data_bytes"] > 0
    assert counters[FragmentStrategy.PURE_BLOCK]["moved_bytes"] == 0
    hub_moves = counters[FragmentStrategy.HETEROGENEOUS]["moved_bytes"]
    assert hub_moves <= counters[FragmentStrategy.PURE_SEGMENT]["moved_bytes"]


TOPOLOGIES = {
    "uniform": lambda seed: uniform_graph(2000, 20000, seed),
    "star": lambda seed: star_graph(5000),
    "power_law": lambda seed: power_law_graph(20000, seed),
}


@pytest.mark.slow
@pytest.mark.parametrize("topology", sorted(TOPOLOGIES))
def test_heterogeneous_layout_orderings(topology):
    settings = Settings(_env_file=None)
    graph = TOPOLOGIES[topology](settings.BENCH_SEED)
    delta = preferential_delta(graph, 0.001, settings.BENCH_SEED)
    counters = {s: memory_counters(graph, delta, settings, s) for s in FragmentStrategy}
    hetero = counters[FragmentStrategy.HETEROGENEOUS]
    segment = counters[FragmentStrategy.PURE_SEGMENT]
    block = counters[FragmentStrategy.PURE_BLOCK]
    assert hetero["reserved_bytes"] <= 1.30 * segment["reserved_bytes"]
    assert hetero["reserved_bytes"] <= block["reserved_bytes"]
    assert hetero["moved_bytes"] < segment["moved_bytes"]


@pytest.mark.slow
def test_memory_preset_rows():
    report = BenchService(Settings(_env_file=None), timing=False).run("memory")
    assert report.columns == ["topology", "strategy", "reserved_bytes", "data_bytes", "moved_bytes"]
    assert len(report.rows) == 3 * len(FragmentStrategy)


# -----------------------
# planner presets
# -----------------------


def test_ablation_report(small_settings):
    report = BenchService(small_settings, timing=False).run("ablation")
    assert report.columns == ["feature", "rows", "cost", "seconds"]
    assert [r[0] for r in report.rows] == ["all", "no_hash_ops", "no_intersective", "no_optimizer"]
    assert all(r[3] == "-" for r in report.rows)
    assert len({r[1] for r in report.rows}) == 1
    costs = {r[0]: r[2] for r in report.rows}
    assert costs["all"] <= costs["no_hash_ops"]
    assert costs["all"] <= costs["no_optimizer"]


def test_patterns_report(small_settings):
    report = BenchService(small_settings, timing=False).run("patterns")
    assert [r[0] for r in report.rows] == ["path", "triangle", "four_cycle", "diamond"]
    for _, _, optimized, canonical, *_ in report.rows:
        assert optimized <= canonical


@pytest.mark.slow
def test_triangle_plans_agree():
    settings = Settings(_env_file=None, BENCH_TRIANGLE_EDGES=2000, BENCH_REPEAT=1)
    report = BenchService(settings, timing=False).run("triangle")
    (exploration, edge_join) = report.rows
    assert exploration[1] == edge_join[1]


@pytest.mark.slow
def test_exploration_beats_edge_join_on_triangles():
    report = BenchService(Settings(_env_file=None, BENCH_REPEAT=3)).run("triangle")
    (exploration, edge_join) = report.rows
    assert exploration[1] == edge_join[1]
    assert exploration[3] >= 2.0
