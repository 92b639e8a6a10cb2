import logging
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from app.core.config import Settings
from app.core.exceptions import ConfigError, NotFound, SchemaError
from app.exec.executor import Executor, QueryResult
from app.graph.browse import Ontology, browse, extract_ontology
from app.graph.delta import DeltaReport, apply_delta
from app.graph.loader import load_delta, load_graph_csv, load_table_csv
from app.graph.rg import RgGraphStore, convert
from app.graph.stats import GraphStats, collect_relation_stats, collect_stats
from app.models.schemas import CostParams, PropertyGraph, StoreConfig
from app.models.values import Column, infer_type
from app.planner.estimate import StatsOverride, load_override
from app.planner.explain import explain
from app.planner.optimizer import Planner, PlannerOptions
from app.planner.physical import PhysicalPlan
from app.services.output import FORMATS
from app.sqldelta.logical import Catalog, build_logical
from app.sqldelta.parser import parse
from app.store.snapshot import open_snapshot, save_snapshot
from app.store.store import RegularFormReport, RgStore

logger = logging.getLogger(__name__)

_TRUE = ("on", "true", "1", "yes")
_FALSE = ("off", "false", "0", "no")
PLANNER_KEYS = ("hash_ops", "intersective", "optimizer", "candidates")
STORE_KEYS = ("block_size", "segment_threshold", "strategy", "ref_mode")


def parse_flag(key: str, text: str) -> bool:
    lowered = text.lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ConfigError(f"{key} expects on or off, got {text!r}")


class Session:
    """
    One interactive session: the store with its named graphs and tables, and the
    planning and output settings that apply to the queries run against them.

    Attributes:
        settings (Settings): The settings the session started from.
        store (RgStore): The extended database holding every graph and table.
        graphs (dict[str, RgGraphStore]): Loaded graphs by name.
        tables (list[str]): Loaded plain relations.
        params (CostParams): Cost-model parameters (τ, κ).
        options (PlannerOptions): Planner feature switches.
        override (Optional[StatsOverride]): Injected planner statistics, if any.
        chunk_size (int): Executor chunk size.
        output_format (str): csv, tsv or table.
        timing (bool): Whether timings are printed.
    """

    def __init__(self, settings: Settings, override: Optional[StatsOverride] = None):
        self.settings = settings
        self.store = RgStore(settings.store_config())
        self.graphs: dict[str, RgGraphStore] = {}
        self.tables: list[str] = []
        self.params: CostParams = settings.cost_params()
        self.options = PlannerOptions()
        self.override = override
        self.chunk_size = settings.CHUNK_SIZE
        self.output_format = settings.OUTPUT_FORMAT
        self.timing = True
        self._stats: Optional[GraphStats] = None
        logger.info("🔧 Session initialized.")

    @property
    def catalog(self) -> Catalog:
        return Catalog(self.store, self.graphs, self.tables)

    def _check_name(self, name: str):
        if name in self.graphs or name in self.tables:
            raise SchemaError(f"{name} is already loaded")

    def _invalidate(self):
        self._stats = None

    # -----------------------
    # loading
    # -----------------------

    def add_graph(self, name: str, graph: PropertyGraph) -> RgGraphStore:
        """
        Converts an in-memory property graph into the session store.

        Args:
            name (str): The graph name used in `from NAME match ...`.
            graph (PropertyGraph): Vertices and edges to convert.

        Returns:
            RgGraphStore: The converted graph.

        Raises:
            SchemaError: If the name is taken.
            ConversionError: If the graph is malformed.
        """
        self._check_name(name)
        try:
            rg = convert(graph, name=name, store=self.store)
        except Exception as e:
            logger.exception(f"❌ Conversion of graph {name} failed")
            raise e
        self.graphs[name] = rg
        self._invalidate()
        return rg

    def load_graph(self, name: str, vertices_path: str, edges_path: str) -> RgGraphStore:
        logger.info(f"📦 Loading graph {name} from {vertices_path}, {edges_path}")
        return self.add_graph(name, load_graph_csv(vertices_path, edges_path))

    def add_table(self, name: str, header: list[str], rows: list[tuple]) -> int:
        """
        Registers a plain relation with column types inferred from its values.

        Returns:
            int: The number of rows stored.
        """
        self._check_name(name)
        columns = [Column(col, infer_type(r[i] for r in rows)) for i, col in enumerate(header)]
        try:
            self.store.create_relation(name, columns)
            self.store.new_fragment(name, rows)
        except Exception as e:
            self.store.drop_relation(name)
            logger.exception(f"❌ Loading table {name} failed")
            raise e
        self.tables.append(name)
        self._invalidate()
        logger.info(f"✅ Table {name} loaded: {len(rows)} rows")
        return len(rows)

    def load_table(self, name: str, path: str) -> int:
        logger.info(f"📦 Loading table {name} from {path}")
        header, rows = load_table_csv(path)
        return self.add_table(name, header, rows)

    def graph(self, name: str) -> RgGraphStore:
        rg = self.graphs.get(name)
        if rg is None:
            raise NotFound(f"unknown graph {name}")
        return rg

    # -----------------------
    # statistics
    # -----------------------

    def collect(self) -> GraphStats:
        """Statistics over every graph and table, cached until the next change."""
        if self._stats is None:
            stats = collect_relation_stats(self.store, self.tables)
            for rg in self.graphs.values():
                stats = stats.merge(collect_stats(rg))
            self._stats = stats
        return self._stats

    def stats(self, name: str) -> list[tuple[str, object]]:
        """
        Counts for one graph (vertices, edges, then per relation) or one table.

        Raises:
            NotFound: If nothing by that name is loaded.
        """
        if name in self.tables:
            return [("rows", self.store.count(name))]
        rg = self.graph(name)
        stats = collect_stats(rg)
        out: list[tuple[str, object]] = [("vertices", rg.vertex_count()), ("edges", len(rg.edges))]
        for relation in sorted(stats.counts):
            out.append((relation, stats.counts[relation]))
        for key in sorted(stats.degrees):
            out.append((f"avg_degree({key})", round(stats.degrees[key], 4)))
        return out

    # -----------------------
    # queries
    # -----------------------

    def planner(self) -> Planner:
        return Planner(
            self.catalog,
            self.collect(),
            self.params,
            self.options,
            self.override,
            self.settings.DEFAULT_CARDINALITY,
            self.settings.DEFAULT_DEGREE,
        )

    def compile(self, sql: str) -> PhysicalPlan:
        """
        Parses, binds and plans one SQL_δ query.

        Raises:
            ParseError: On syntax errors.
            BindError: On unknown names or invalid patterns.
        """
        logical = build_logical(parse(sql), self.catalog)
        plan = self.planner().plan(logical)
        logger.info(f"🧭 Planned query: cost {plan.cost:.1f}")
        return plan

    def explain(self, sql: str) -> str:
        return explain(self.compile(sql))

    def query(self, sql: str) -> QueryResult:
        plan = self.compile(sql)
        try:
            return Executor(self.store, self.graphs, self.chunk_size).execute(plan)
        except Exception as e:
            logger.exception("❌ Query execution failed")
            raise e

    # -----------------------
    # graph maintenance
    # -----------------------

    def browse(self, name: str, vid: int, depth: Optional[int] = None) -> PropertyGraph:
        return browse(self.graph(name), [vid], depth)

    def ontology(self, name: str) -> Ontology:
        return extract_ontology(self.graph(name))

    def validate(self, name: str) -> RegularFormReport:
        return self.store.validate_regular_form(self.graph(name).relation_names())

    def update(self, name: str, path: str) -> DeltaReport:
        """
        Applies a delta file to a loaded graph.

        Raises:
            NotFound: If the graph or file does not exist.
            DeltaError: If the delta does not apply.
        """
        rg = self.graph(name)
        delta = load_delta(path)
        report = apply_delta(rg, delta)
        self._invalidate()
        return report

    # -----------------------
    # snapshots
    # -----------------------

    def save(self, path: str) -> int:
        meta = {"graphs": [rg.to_meta() for rg in self.graphs.values()], "tables": list(self.tables)}
        try:
            return save_snapshot(path, self.store, meta)
        except OSError as e:
            logger.exception(f"❌ Could not write snapshot {path}")
            raise ConfigError(f"cannot write {path}: {e}") from e

    def open(self, path: str):
        store, meta = open_snapshot(Path(path))
        self.store = store
        self.graphs = {m["name"]: RgGraphStore.from_meta(store, m) for m in meta.get("graphs", [])}
        self.tables = list(meta.get("tables", []))
        self._invalidate()
        logger.info(f"✅ Session restored: {len(self.graphs)} graphs, {len(self.tables)} tables")

    # -----------------------
    # settings
    # -----------------------

    def set_option(self, key: str, value: str) -> str:
        """
        Changes one session setting and echoes it back as `key = value`.

        Raises:
            ConfigError: On an unknown key or a value the key does not accept.
        """
        key = key.lower()
        if key in ("tau", "kappa"):
            try:
                self.params = CostParams(**{**self.params.model_dump(), key: float(value)})
            except (ValueError, ValidationError) as e:
                raise ConfigError(f"invalid {key} {value!r}") from e
            shown = getattr(self.params, key)
        elif key == "chunk_size":
            size = self._int(key, value)
            if size < 1:
                raise ConfigError("chunk_size must be positive")
            self.chunk_size = shown = size
        elif key == "format":
            if value not in FORMATS:
                raise ConfigError(f"format must be one of {', '.join(FORMATS)}")
            self.output_format = shown = value
        elif key == "timing":
            self.timing = shown = parse_flag(key, value)
        elif key in PLANNER_KEYS:
            flag = parse_flag(key, value)
            self.options = self.options.model_copy(update={key: flag})
            shown = flag
        elif key == "stats":
            self.override = None if value.lower() in _FALSE else load_override(value)
            shown = value
        elif key in STORE_KEYS:
            shown = self._set_store(key, value)
        else:
            raise ConfigError(f"unknown setting {key}")
        if isinstance(shown, bool):
            shown = "on" if shown else "off"
        logger.info(f"🔧 {key} set to {shown}")
        return f"{key} = {shown}"

    @staticmethod
    def _int(key: str, value: str) -> int:
        try:
            return int(value)
        except ValueError as e:
            raise ConfigError(f"{key} expects an integer, got {value!r}") from e

    def _set_store(self, key: str, value: str):
        if self.graphs or self.tables:
            raise ConfigError(f"{key} can only change before anything is loaded")
        current = self.store.config.model_dump()
        if key in ("block_size", "segment_threshold"):
            current[key] = self._int(key, value)
        else:
            current[key] = value
        try:
            config = StoreConfig(**current)
        except ValidationError as e:
            raise ConfigError(f"invalid {key} {value!r}: {e.errors()[0]['msg']}") from e
        self.store = RgStore(config)
        self._invalidate()
        shown = getattr(config, key)
        return shown.value if hasattr(shown, "value") else shown
