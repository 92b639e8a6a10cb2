import logging
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import networkx as nx
import numpy as np

from app.core.config import Settings
from app.core.exceptions import ConfigError
from app.graph.delta import apply_delta
from app.graph.rg import convert
from app.models.schemas import EdgeRecord, FragmentStrategy, GraphDelta, PropertyGraph, StoreConfig, VertexRecord
from app.services.session import Session

logger = logging.getLogger(__name__)

PRESETS = ("triangle", "patterns", "ablation", "memory")

TRIANGLE_QUERY = "select a.id, b.id, c.id from g match (a)->(b)->(c)->(a)"
EDGE_JOIN_QUERY = (
    "select e1.src, e2.src, e3.src from E as e1 join E as e2 on e1.dst = e2.src "
    "join E as e3 on e2.dst = e3.src and e3.dst = e1.src"
)
PATTERNS = {
    "path": "select a.id, c.id from g match (a)->(b)->(c)",
    "triangle": TRIANGLE_QUERY,
    "four_cycle": "select a.id, c.id from g match (a)->(b)->(c)->(d)->(a)",
    "diamond": "select a.id, d.id from g match (a)->(b)->(d), (a)->(c)->(d)",
}
ABLATIONS = (
    ("all", None),
    ("no_hash_ops", "hash_ops"),
    ("no_intersective", "intersective"),
    ("no_optimizer", "optimizer"),
)


@dataclass
class BenchReport:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)


# -----------------------
# graph generators
# -----------------------


def from_networkx(graph: nx.DiGraph, label: str = "Node", edge_label: str = "E") -> PropertyGraph:
    """Directed (multi)graph to a property graph; edge ids follow networkx edge order."""
    vertices = [VertexRecord(vid=int(v), label=label) for v in sorted(graph.nodes)]
    edges = [
        EdgeRecord(eid=i, src=int(u), dst=int(v), label=edge_label)
        for i, (u, v) in enumerate(graph.edges())
    ]
    return PropertyGraph(vertices=vertices, edges=edges)


def uniform_graph(n: int, m: int, seed: int) -> PropertyGraph:
    return from_networkx(nx.gnm_random_graph(n, m, seed=seed, directed=True))


def star_graph(leaves: int) -> PropertyGraph:
    """One hub pointing at every leaf."""
    return from_networkx(nx.bfs_tree(nx.star_graph(leaves), 0))


def power_law_graph(n: int, seed: int) -> PropertyGraph:
    """Out-degree of vertex i is max(1, n // (i+1)^2); targets are uniform, never the source."""
    rng = np.random.default_rng(seed)
    graph = nx.MultiDiGraph()
    graph.add_nodes_from(range(n))
    for src in range(n):
        for dst in rng.integers(0, n - 1, size=max(1, n // (src + 1) ** 2)).tolist():
            graph.add_edge(src, dst + (dst >= src))
    return from_networkx(graph)


def preferential_delta(graph: PropertyGraph, fraction: float, seed: int) -> GraphDelta:
    """
    New edges amounting to `fraction` of the edge count. Sources are drawn from the
    sources of existing edges, so high out-degree vertices receive most insertions.
    """
    rng = np.random.default_rng(seed)
    count = max(1, round(len(graph.edges) * fraction))
    next_eid = max((e.eid for e in graph.edges), default=-1) + 1
    vids = [v.vid for v in graph.vertices]
    picks = rng.integers(0, len(graph.edges), size=count)
    targets = rng.integers(0, len(vids), size=count)
    return GraphDelta(
        add_edges=[
            EdgeRecord(eid=next_eid + i, src=graph.edges[int(p)].src, dst=vids[int(t)], label="E")
            for i, (p, t) in enumerate(zip(picks, targets))
        ]
    )


class BenchService:
    """
    Desk-scale benchmarks run against scratch sessions built from the given settings.

    Attributes:
        settings (Settings): Sizes, seed and repetition count.
        timing (bool): When false every timing cell reads `-`, so reports are stable.
    """

    def __init__(self, settings: Settings, timing: bool = True):
        self.settings = settings
        self.timing = timing
        logger.info("🔧 BenchService initialized.")

    def run(self, preset: str) -> BenchReport:
        """
        Runs one preset.

        Raises:
            ConfigError: If the preset is unknown.
        """
        if preset not in PRESETS:
            raise ConfigError(f"unknown bench preset {preset}; expected one of {', '.join(PRESETS)}")
        logger.info(f"🚀 Running bench preset {preset}")
        try:
            report = getattr(self, preset)()
        except Exception as e:
            logger.exception(f"❌ Bench preset {preset} failed")
            raise e
        logger.info(f"✅ Bench preset {preset} done: {len(report.rows)} rows")
        return report

    # -----------------------
    # helpers
    # -----------------------

    def _seconds(self, value: float):
        return round(value, 6) if self.timing else "-"

    def _time(self, work: Callable[[], int], repeat: Optional[int] = None) -> tuple[int, float]:
        """Result count of `work` and its median wall-clock time over `repeat` runs."""
        timings, count = [], 0
        for _ in range(repeat or self.settings.BENCH_REPEAT):
            start = time.perf_counter()
            count = work()
            timings.append(time.perf_counter() - start)
        return count, statistics.median(timings)

    def _session(self, graph: PropertyGraph) -> Session:
        session = Session(self.settings)
        session.add_graph("g", graph)
        return session

    def _pattern_graph(self) -> PropertyGraph:
        edges = max(10, self.settings.BENCH_TRIANGLE_EDGES // 10)
        return uniform_graph(max(4, edges // 5), edges, self.settings.BENCH_SEED)

    # -----------------------
    # presets
    # -----------------------

    def triangle(self) -> BenchReport:
        """Exploration plan against the three-way self-join of an edge table."""
        m = self.settings.BENCH_TRIANGLE_EDGES
        graph = uniform_graph(max(4, m // 10), m, self.settings.BENCH_SEED)
        session = self._session(graph)
        session.add_table("E", ["eid", "src", "dst"], [(e.eid, e.src, e.dst) for e in graph.edges])
        explore_rows, explore_s = self._time(lambda: len(session.query(TRIANGLE_QUERY).rows))
        join_rows, join_s = self._time(lambda: len(session.query(EDGE_JOIN_QUERY).rows))
        speedup = round(join_s / explore_s, 3) if self.timing and explore_s > 0 else "-"
        return BenchReport(
            ["plan", "rows", "median_seconds", "speedup"],
            [
                ("exploration", explore_rows, self._seconds(explore_s), speedup),
                ("edge_join", join_rows, self._seconds(join_s), "-"),
            ],
        )

    def patterns(self) -> BenchReport:
        """Optimized against canonical order over the pattern catalogue."""
        session = self._session(self._pattern_graph())
        report = BenchReport(
            ["pattern", "rows", "cost_optimized", "cost_canonical", "seconds_optimized", "seconds_canonical"]
        )
        for name, sql in PATTERNS.items():
            session.set_option("optimizer", "on")
            optimized = session.compile(sql).cost
            rows, optimized_s = self._time(lambda: len(session.query(sql).rows), 1)
            session.set_option("optimizer", "off")
            canonical = session.compile(sql).cost
            canonical_rows, canonical_s = self._time(lambda: len(session.query(sql).rows), 1)
            if rows != canonical_rows:
                logger.warning(f"⚠️ {name}: optimized and canonical plans disagree ({rows} vs {canonical_rows})")
            report.rows.append(
                (name, rows, round(optimized, 1), round(canonical, 1), self._seconds(optimized_s), self._seconds(canonical_s))
            )
        return report

    def ablation(self) -> BenchReport:
        """The four-cycle pattern with one planner feature switched off per row."""
        session = self._session(self._pattern_graph())
        sql = PATTERNS["four_cycle"]
        report = BenchReport(["feature", "rows", "cost", "seconds"])
        for label, switch in ABLATIONS:
            for key in ("hash_ops", "intersective", "optimizer"):
                session.set_option(key, "off" if key == switch else "on")
            cost = session.compile(sql).cost
            rows, seconds = self._time(lambda: len(session.query(sql).rows), 1)
            report.rows.append((label, rows, round(cost, 1), self._seconds(seconds)))
        return report

    def memory(self) -> BenchReport:
        """
        Reserved and live bytes per fragment strategy on three topologies, and the
        bytes moved by inserting 1‰ new edges.
        """
        seed = self.settings.BENCH_SEED
        topologies = {
            "uniform": uniform_graph(2000, 20000, seed),
            "star": star_graph(5000),
            "power_law": power_law_graph(20000, seed),
        }
        report = BenchReport(["topology", "strategy", "reserved_bytes", "data_bytes", "moved_bytes"])
        for name, graph in topologies.items():
            delta = preferential_delta(graph, 0.001, seed)
            for strategy in FragmentStrategy:
                counters = memory_counters(graph, delta, self.settings, strategy)
                report.rows.append(
                    (name, strategy.value, counters["reserved_bytes"], counters["data_bytes"], counters["moved_bytes"])
                )
        return report


def memory_counters(
    graph: PropertyGraph, delta: GraphDelta, settings: Settings, strategy: FragmentStrategy
) -> dict[str, int]:
    """Storage counters after conversion, with `moved_bytes` covering only the delta."""
    config = StoreConfig(
        block_size=settings.BLOCK_SIZE,
        segment_threshold=settings.SEGMENT_THRESHOLD,
        segment_reserve_factor=settings.SEGMENT_RESERVE_FACTOR,
        strategy=strategy,
    )
    rg = convert(graph, config)
    counters = rg.store.manager.counters()
    report = apply_delta(rg, delta)
    counters["moved_bytes"] = report.moved_bytes
    return counters
