"""
The five-relation encoding of a property graph inside an RgStore.

    <g>.V(vid, label, out_L -> <g>.E_out, in_L -> <g>.E_in)
    <g>.E_out(eid, label, dst_L -> <g>.V)
    <g>.E_in(eid, label, src_L -> <g>.V)
    <g>.V_A.<label>(vid, A_1..A_n)    one per vertex label
    <g>.E_A.<label>(eid, B_1..B_m)    one per edge label

The vertex relation is a single fragment; dst_L/src_L are single-tuple refs into it,
and out_L/in_L designate the per-vertex edge fragments (the shared empty sentinel
when a vertex has no edges on that side).
"""

import logging
from collections import defaultdict
from typing import Any, Iterable, Optional

from app.core.exceptions import ConversionError, NotFound
from app.models.schemas import PropertyGraph, RefMode, StoreConfig
from app.models.values import Column, ColumnType, PlainValue, RefValue, infer_type
from app.store.arena import Fragment
from app.store.store import RgStore

logger = logging.getLogger(__name__)

RESERVED_ATTRS = {"id", "vid", "eid", "label", "src", "dst"}

V_COLUMNS = ("vid", "label", "out_L", "in_L")
OUT_COLUMNS = ("eid", "label", "dst_L")
IN_COLUMNS = ("eid", "label", "src_L")


def coerce(value: Any, kind: ColumnType) -> PlainValue:
    if value is None:
        return None
    try:
        if kind is ColumnType.STRING:
            return value if isinstance(value, str) else str(value)
        if kind is ColumnType.FLOAT and not isinstance(value, bool):
            return float(value)
        if kind is ColumnType.INT and isinstance(value, int) and not isinstance(value, bool):
            return value
        if kind is ColumnType.BOOL and isinstance(value, bool):
            return value
    except (TypeError, ValueError):
        pass
    raise ConversionError(f"value {value!r} does not fit a {kind.value} attribute")


def attr_schema(records: Iterable, key: str) -> dict[str, list[Column]]:
    """Per label, the id column plus the union of attribute names with inferred types."""
    values: dict[str, dict[str, list]] = defaultdict(lambda: defaultdict(list))
    labels: list[str] = []
    for r in records:
        if r.label not in values:
            labels.append(r.label)
        per_label = values[r.label]
        for name, v in r.attrs.items():
            if name in RESERVED_ATTRS:
                raise ConversionError(f"attribute name {name!r} is reserved")
            per_label[name].append(v)
    out = {}
    for label in labels:
        per_label = values[label]
        out[label] = [Column(key, ColumnType.INT)] + [
            Column(name, infer_type(per_label[name])) for name in sorted(per_label)
        ]
    return out


class RgGraphStore:
    """
    A property graph held in RG form, plus the in-memory id indexes that map vids and
    eids to tuple positions.
    """

    def __init__(self, name: str, store: RgStore):
        self.name = name
        self.store = store
        self.v_attrs: dict[str, str] = {}
        self.e_attrs: dict[str, str] = {}
        self.v_fragment: Fragment = store.empty_fragment
        self.attr_fragments: dict[str, Fragment] = {}
        self.vertex_at: dict[int, int] = {}
        self.v_attr_at: dict[int, tuple[str, int]] = {}
        self.e_attr_at: dict[int, tuple[str, int]] = {}
        self.edges: dict[int, tuple[int, int, str]] = {}

    # -----------------------
    # catalog
    # -----------------------

    @property
    def d_v(self) -> str:
        return f"{self.name}.V"

    @property
    def d_out(self) -> str:
        return f"{self.name}.E_out"

    @property
    def d_in(self) -> str:
        return f"{self.name}.E_in"

    def relation_names(self) -> list[str]:
        return [self.d_v, self.d_out, self.d_in, *self.v_attrs.values(), *self.e_attrs.values()]

    def create_relations(self):
        self.store.create_relation(
            self.d_v,
            [
                Column("vid", ColumnType.INT),
                Column("label", ColumnType.STRING),
                Column("out_L", ColumnType.REF, self.d_out),
                Column("in_L", ColumnType.REF, self.d_in),
            ],
        )
        self.store.create_relation(
            self.d_out,
            [
                Column("eid", ColumnType.INT),
                Column("label", ColumnType.STRING),
                Column("dst_L", ColumnType.REF, self.d_v),
            ],
        )
        self.store.create_relation(
            self.d_in,
            [
                Column("eid", ColumnType.INT),
                Column("label", ColumnType.STRING),
                Column("src_L", ColumnType.REF, self.d_v),
            ],
        )

    def add_attr_relation(self, kind: str, label: str, columns: list[Column]) -> str:
        if kind == "V":
            name, table = f"{self.name}.V_A.{label}", self.v_attrs
        else:
            name, table = f"{self.name}.E_A.{label}", self.e_attrs
        self.store.create_relation(name, columns)
        table[label] = name
        self.attr_fragments[name] = self.store.empty_fragment
        return name

    def attr_columns(self, kind: str, label: str) -> list[Column]:
        table = self.v_attrs if kind == "V" else self.e_attrs
        if label not in table:
            return []
        return list(self.store.relation(table[label]).schema.columns[1:])

    def attr_names(self, kind: str, label: Optional[str] = None) -> set[str]:
        table = self.v_attrs if kind == "V" else self.e_attrs
        labels = [label] if label is not None else list(table)
        return {c.name for lb in labels for c in self.attr_columns(kind, lb)}

    # -----------------------
    # refs and lookups
    # -----------------------

    def empty_ref(self, relation: str) -> RefValue:
        return self.store.make_ref(self.store.empty_fragment, target=relation)

    def vertex_ref(self, vid: int) -> RefValue:
        offset = self.vertex_at.get(vid)
        if offset is None:
            raise NotFound(f"vertex {vid} not found in graph {self.name}")
        return self.store.make_row_ref(self.v_fragment, offset)

    def has_vertex(self, vid: int) -> bool:
        return vid in self.vertex_at

    def vertex_offset(self, vid: int) -> int:
        offset = self.vertex_at.get(vid)
        if offset is None:
            raise NotFound(f"vertex {vid} not found in graph {self.name}")
        return offset

    def vertex_row(self, vid: int) -> tuple:
        return self.store.fragment_rows(self.v_fragment)[self.vertex_offset(vid)]

    def vertex_rows(self) -> list[tuple]:
        return [r for r in self.store.fragment_rows(self.v_fragment) if r is not None]

    def vertex_ids(self) -> list[int]:
        return sorted(self.vertex_at)

    def vertex_count(self) -> int:
        return len(self.vertex_at)

    def out_rows(self, vid: int) -> list[tuple]:
        return self.store.resolve(self.vertex_row(vid)[2])

    def in_rows(self, vid: int) -> list[tuple]:
        return self.store.resolve(self.vertex_row(vid)[3])

    def co_located(self, vid: int) -> bool:
        """Whether the vertex's in-edge fragment starts right where its out-edge fragment ends."""
        _, _, out_ref, in_ref = self.vertex_row(vid)
        return self.store.manager.adjacent(self.store.fragment_of(out_ref), self.store.fragment_of(in_ref))

    def referent_id(self, ref: RefValue) -> int:
        """Id of the tuple a single-tuple ref designates."""
        return self.store.resolve(ref)[0][0]

    def _attr_row(self, kind: str, key: int) -> tuple[Optional[tuple], Optional[str]]:
        index = self.v_attr_at if kind == "V" else self.e_attr_at
        table = self.v_attrs if kind == "V" else self.e_attrs
        hit = index.get(key)
        if hit is None:
            return None, None
        label, offset = hit
        fragment = self.attr_fragments[table[label]]
        return self.store.fragment_rows(fragment)[offset], table[label]

    def attr_value(self, kind: str, key: int, attr: str) -> PlainValue:
        row, relation = self._attr_row(kind, key)
        if row is None:
            return None
        names = self.store.relation(relation).schema.names
        return row[names.index(attr)] if attr in names else None

    def attr_getter(self, kind: str, attr: str):
        """A fast key -> value accessor for one attribute name across labels."""
        index = self.v_attr_at if kind == "V" else self.e_attr_at
        table = self.v_attrs if kind == "V" else self.e_attrs
        positions = {}
        for label, relation in table.items():
            names = self.store.relation(relation).schema.names
            if attr in names:
                positions[label] = (relation, names.index(attr))
        store = self.store
        fragments = self.attr_fragments

        def get(key: int) -> PlainValue:
            hit = index.get(key)
            if hit is None:
                return None
            where = positions.get(hit[0])
            if where is None:
                return None
            return store.fragment_rows(fragments[where[0]])[hit[1]][where[1]]

        return get

    def vertex_attrs(self, vid: int) -> dict[str, PlainValue]:
        row, relation = self._attr_row("V", vid)
        if row is None:
            return {}
        names = self.store.relation(relation).schema.names
        return {n: v for n, v in zip(names[1:], row[1:]) if v is not None}

    def edge_attrs(self, eid: int) -> dict[str, PlainValue]:
        row, relation = self._attr_row("E", eid)
        if row is None:
            return {}
        names = self.store.relation(relation).schema.names
        return {n: v for n, v in zip(names[1:], row[1:]) if v is not None}

    # -----------------------
    # indexes
    # -----------------------

    def reindex(self):
        """Rebuilds the id indexes from stored tuples (after conversion or reopening)."""
        self.vertex_at.clear()
        self.v_attr_at.clear()
        self.e_attr_at.clear()
        self.edges.clear()
        rows = self.store.fragment_rows(self.v_fragment)
        for offset, row in enumerate(rows):
            if row is not None:
                self.vertex_at[row[0]] = offset
        for kind, table, index in (("V", self.v_attrs, self.v_attr_at), ("E", self.e_attrs, self.e_attr_at)):
            for label, relation in table.items():
                for offset, row in enumerate(self.store.fragment_rows(self.attr_fragments[relation])):
                    if row is not None:
                        index[row[0]] = (label, offset)
        for row in rows:
            if row is None:
                continue
            for eid, label, dst_ref in self.store.resolve(row[2]):
                self.edges[eid] = (row[0], self.referent_id(dst_ref), label)

    def to_meta(self) -> dict:
        return {
            "name": self.name,
            "v_attrs": self.v_attrs,
            "e_attrs": self.e_attrs,
            "v_fragment": self.v_fragment.fid,
            "attr_fragments": {k: f.fid for k, f in self.attr_fragments.items()},
        }

    @classmethod
    def from_meta(cls, store: RgStore, meta: dict) -> "RgGraphStore":
        rg = cls(meta["name"], store)
        rg.v_attrs = dict(meta["v_attrs"])
        rg.e_attrs = dict(meta["e_attrs"])
        rg.v_fragment = store.fragment(meta["v_fragment"])
        rg.attr_fragments = {k: store.fragment(fid) for k, fid in meta["attr_fragments"].items()}
        rg.reindex()
        return rg

    def __repr__(self) -> str:
        return f"RgGraphStore({self.name}: {self.vertex_count()} vertices, {len(self.edges)} edges)"


def convert(
    graph: PropertyGraph,
    config: Optional[StoreConfig] = None,
    name: str = "g",
    store: Optional[RgStore] = None,
) -> RgGraphStore:
    """
    Converts a property graph into its RG representation.

    Args:
        graph (PropertyGraph): The graph to convert.
        config (Optional[StoreConfig]): Storage configuration for a fresh store.
        name (str): Relation name prefix.
        store (Optional[RgStore]): An existing store to convert into.

    Returns:
        RgGraphStore: The converted graph.

    Raises:
        ConversionError: On duplicate ids, dangling endpoints or reserved attribute names.
    """
    store = store or RgStore(config)
    config = store.config
    logger.info(f"📦 Converting graph {name}: {len(graph.vertices)} vertices, {len(graph.edges)} edges")

    vids = [v.vid for v in graph.vertices]
    if len(vids) != len(set(vids)):
        raise ConversionError(f"graph {name}: duplicate vertex ids")
    eids = [e.eid for e in graph.edges]
    if len(eids) != len(set(eids)):
        raise ConversionError(f"graph {name}: duplicate edge ids")
    known = set(vids)
    for e in graph.edges:
        if e.src not in known or e.dst not in known:
            raise ConversionError(f"edge {e.eid} references an unknown vertex")

    vertices = sorted(graph.vertices, key=lambda v: v.vid)
    edges = sorted(graph.edges, key=lambda e: e.eid)
    v_schemas = attr_schema(vertices, "vid")
    e_schemas = attr_schema(edges, "eid")

    rg = RgGraphStore(name, store)
    rg.create_relations()
    for label in sorted(v_schemas):
        rg.add_attr_relation("V", label, v_schemas[label])
    for label in sorted(e_schemas):
        rg.add_attr_relation("E", label, e_schemas[label])

    empty_out = rg.empty_ref(rg.d_out)
    empty_in = rg.empty_ref(rg.d_in)
    v_fragment = store.new_fragment(rg.d_v, [(v.vid, v.label, empty_out, empty_in) for v in vertices])
    rg.v_fragment = v_fragment
    offset_of = {v.vid: i for i, v in enumerate(vertices)}
    vref = {v.vid: store.make_row_ref(v_fragment, offset_of[v.vid]) for v in vertices}

    out_rows: dict[int, list] = defaultdict(list)
    in_rows: dict[int, list] = defaultdict(list)
    for e in edges:
        out_rows[e.src].append((e.eid, e.label, vref[e.dst]))
        in_rows[e.dst].append((e.eid, e.label, vref[e.src]))

    def allocate(relation: str, rows: list) -> RefValue:
        return store.make_ref(store.new_fragment(relation, rows), target=relation)

    out_ref: dict[int, RefValue] = {}
    in_ref: dict[int, RefValue] = {}
    if config.locality:
        for v in vertices:
            out_ref[v.vid] = allocate(rg.d_out, out_rows.get(v.vid, []))
            in_ref[v.vid] = allocate(rg.d_in, in_rows.get(v.vid, []))
    else:
        for v in vertices:
            out_ref[v.vid] = allocate(rg.d_out, out_rows.get(v.vid, []))
        for v in vertices:
            in_ref[v.vid] = allocate(rg.d_in, in_rows.get(v.vid, []))
    store.overwrite_rows(
        v_fragment, [(v.vid, v.label, out_ref[v.vid], in_ref[v.vid]) for v in vertices]
    )

    for kind, records, table in (("V", vertices, rg.v_attrs), ("E", edges, rg.e_attrs)):
        by_label = defaultdict(list)
        for r in records:
            by_label[r.label].append(r)
        for label, relation in table.items():
            columns = store.relation(relation).schema.columns
            rows = [
                (r.vid if kind == "V" else r.eid, *[coerce(r.attrs.get(c.name), c.type) for c in columns[1:]])
                for r in by_label[label]
            ]
            rg.attr_fragments[relation] = store.new_fragment(relation, rows)

    rg.reindex()
    logger.info(f"✅ Graph {name} converted ({store.manager.reserved_bytes} bytes reserved)")
    return rg


def _render(value: Any, rg: RgGraphStore) -> Any:
    if isinstance(value, RefValue):
        return tuple(sorted(row[0] for row in rg.store.resolve(value)))
    return value


def content_signature(rg: RgGraphStore) -> dict[str, list[str]]:
    """
    Order-insensitive logical content of every relation of the graph, refs replaced by
    the sorted ids of their referents. Equal signatures mean content-equivalent stores.
    """
    out: dict[str, list[str]] = {}
    store = rg.store
    v_rows = rg.vertex_rows()
    out["V"] = sorted(repr(tuple(_render(x, rg) for x in row)) for row in v_rows)
    out["E_out"] = sorted(
        repr((row[0], *(_render(x, rg) for x in e)))
        for row in v_rows
        for e in store.resolve(row[2])
    )
    out["E_in"] = sorted(
        repr((row[0], *(_render(x, rg) for x in e)))
        for row in v_rows
        for e in store.resolve(row[3])
    )
    for kind, table in (("V_A", rg.v_attrs), ("E_A", rg.e_attrs)):
        for label, relation in table.items():
            names = store.relation(relation).schema.names
            rows = [r for r in store.fragment_rows(rg.attr_fragments[relation]) if r is not None]
            if rows:
                out[f"{kind}.{label}"] = sorted(
                    repr((r[0], sorted((n, v) for n, v in zip(names[1:], r[1:]) if v is not None)))
                    for r in rows
                )
    return out


def is_read_only(rg: RgGraphStore) -> bool:
    return rg.store.config.ref_mode is RefMode.DIRECT
