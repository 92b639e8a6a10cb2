import logging
from collections import defaultdict
from dataclasses import dataclass

from app.core.exceptions import ConversionError, DeltaError
from app.graph.rg import RESERVED_ATTRS, RgGraphStore, attr_schema, coerce, is_read_only
from app.models.schemas import GraphDelta
from app.store.arena import Fragment

logger = logging.getLogger(__name__)


@dataclass
class DeltaReport:
    added_vertices: int = 0
    deleted_vertices: int = 0
    added_edges: int = 0
    deleted_edges: int = 0
    moved_bytes: int = 0
    reallocations: int = 0
    promotions: int = 0
    demotions: int = 0


def _duplicates(values) -> list:
    seen, dup = set(), []
    for v in values:
        if v in seen:
            dup.append(v)
        seen.add(v)
    return dup


def validate_delta(rg: RgGraphStore, delta: GraphDelta):
    """
    Checks a delta against the current graph without touching it.

    Raises:
        DeltaError: On unknown or duplicate ids, dangling endpoints, vertices whose
            remaining edges are not deleted, or attribute names a label does not have.
    """
    for kind, ids in (
        ("del_edges", delta.del_edges),
        ("del_vertices", delta.del_vertices),
        ("add_vertices", [v.vid for v in delta.add_vertices]),
        ("add_edges", [e.eid for e in delta.add_edges]),
    ):
        dup = _duplicates(ids)
        if dup:
            raise DeltaError(f"{kind} names id {dup[0]} twice")

    gone_edges = set(delta.del_edges)
    for eid in gone_edges:
        if eid not in rg.edges:
            raise DeltaError(f"cannot delete unknown edge {eid}")
    gone_vertices = set(delta.del_vertices)
    for vid in gone_vertices:
        if not rg.has_vertex(vid):
            raise DeltaError(f"cannot delete unknown vertex {vid}")
        incident = [r[0] for r in rg.out_rows(vid)] + [r[0] for r in rg.in_rows(vid)]
        remaining = [eid for eid in incident if eid not in gone_edges]
        if remaining:
            raise DeltaError(f"vertex {vid} still has edge {remaining[0]}; delete its edges first")

    for v in delta.add_vertices:
        if rg.has_vertex(v.vid) and v.vid not in gone_vertices:
            raise DeltaError(f"vertex {v.vid} already exists")
    alive = (set(rg.vertex_ids()) - gone_vertices) | {v.vid for v in delta.add_vertices}
    for e in delta.add_edges:
        if e.eid in rg.edges and e.eid not in gone_edges:
            raise DeltaError(f"edge {e.eid} already exists")
        if e.src not in alive or e.dst not in alive:
            raise DeltaError(f"edge {e.eid} references a missing vertex ({e.src}->{e.dst})")

    for kind, records in (("V", delta.add_vertices), ("E", delta.add_edges)):
        for r in records:
            columns = {c.name: c for c in rg.attr_columns(kind, r.label)}
            known_label = r.label in (rg.v_attrs if kind == "V" else rg.e_attrs)
            for name, value in r.attrs.items():
                if name in RESERVED_ATTRS:
                    raise DeltaError(f"attribute name {name!r} is reserved")
                if not known_label:
                    continue
                if name not in columns:
                    raise DeltaError(f"label {r.label} has no attribute {name!r}")
                try:
                    coerce(value, columns[name].type)
                except ConversionError as e:
                    raise DeltaError(str(e)) from e


def _append(rg: RgGraphStore, relation: str, fragment: Fragment, rows: list) -> Fragment:
    if fragment.is_empty_sentinel:
        return rg.store.new_fragment(relation, rows)
    return rg.store.append_to_fragment(fragment, rows).fragment


def _rebind(rg: RgGraphStore, vid: int, column: int, ref):
    row = list(rg.vertex_row(vid))
    row[column] = ref
    rg.store.update_row(rg.v_fragment, rg.vertex_offset(vid), row)


def _delete_edges(rg: RgGraphStore, eids: list[int]):
    store = rg.store
    by_src, by_dst = defaultdict(set), defaultdict(set)
    for eid in eids:
        src, dst, _ = rg.edges[eid]
        by_src[src].add(eid)
        by_dst[dst].add(eid)
    for groups, column, relation in ((by_src, 2, rg.d_out), (by_dst, 3, rg.d_in)):
        for vid in sorted(groups):
            ref = rg.vertex_row(vid)[column]
            keep = [r for r in store.resolve(ref) if r[0] not in groups[vid]]
            fragment, _ = store.remove_rows(store.fragment_of(ref), keep)
            if fragment is None:
                _rebind(rg, vid, column, rg.empty_ref(relation))
    for eid in eids:
        label, offset = rg.e_attr_at.pop(eid)
        store.delete_row(rg.attr_fragments[rg.e_attrs[label]], offset)
        del rg.edges[eid]


def _delete_vertices(rg: RgGraphStore, vids: list[int]):
    for vid in vids:
        offset = rg.vertex_at.pop(vid)
        rg.store.delete_row(rg.v_fragment, offset)
        hit = rg.v_attr_at.pop(vid, None)
        if hit is not None:
            label, at = hit
            rg.store.delete_row(rg.attr_fragments[rg.v_attrs[label]], at)


def _add_attr_rows(rg: RgGraphStore, kind: str, records: list):
    table = rg.v_attrs if kind == "V" else rg.e_attrs
    index = rg.v_attr_at if kind == "V" else rg.e_attr_at
    fresh = [r for r in records if r.label not in table]
    for label, columns in attr_schema(fresh, "vid" if kind == "V" else "eid").items():
        rg.add_attr_relation(kind, label, columns)
    by_label = defaultdict(list)
    for r in records:
        by_label[r.label].append(r)
    for label in sorted(by_label):
        relation = table[label]
        columns = rg.store.relation(relation).schema.columns
        fragment = rg.attr_fragments[relation]
        start = fragment.tuple_count
        rows = []
        for r in by_label[label]:
            key = r.vid if kind == "V" else r.eid
            rows.append((key, *[coerce(r.attrs.get(c.name), c.type) for c in columns[1:]]))
        rg.attr_fragments[relation] = _append(rg, relation, fragment, rows)
        for i, row in enumerate(rows):
            index[row[0]] = (label, start + i)


def _add_vertices(rg: RgGraphStore, vertices: list):
    if not vertices:
        return
    vertices = sorted(vertices, key=lambda v: v.vid)
    empty_out, empty_in = rg.empty_ref(rg.d_out), rg.empty_ref(rg.d_in)
    start = rg.v_fragment.tuple_count
    rows = [(v.vid, v.label, empty_out, empty_in) for v in vertices]
    rg.v_fragment = _append(rg, rg.d_v, rg.v_fragment, rows)
    for i, v in enumerate(vertices):
        rg.vertex_at[v.vid] = start + i
    _add_attr_rows(rg, "V", vertices)


def _add_edges(rg: RgGraphStore, edges: list):
    if not edges:
        return
    store = rg.store
    edges = sorted(edges, key=lambda e: (e.src, e.eid))
    by_src, by_dst = defaultdict(list), defaultdict(list)
    for e in edges:
        by_src[e.src].append((e.eid, e.label, rg.vertex_ref(e.dst)))
        by_dst[e.dst].append((e.eid, e.label, rg.vertex_ref(e.src)))
    for groups, column, relation in ((by_src, 2, rg.d_out), (by_dst, 3, rg.d_in)):
        for vid in sorted(groups):
            ref = rg.vertex_row(vid)[column]
            fragment = store.fragment_of(ref)
            if fragment.is_empty_sentinel:
                fragment = store.new_fragment(relation, groups[vid])
                _rebind(rg, vid, column, store.make_ref(fragment, target=relation))
            else:
                store.append_to_fragment(fragment, groups[vid])
    for e in edges:
        rg.edges[e.eid] = (e.src, e.dst, e.label)
    _add_attr_rows(rg, "E", sorted(edges, key=lambda e: e.eid))


def apply_delta(rg: RgGraphStore, delta: GraphDelta) -> DeltaReport:
    """
    Applies a batch update in place: edge deletions, vertex deletions, vertex
    insertions, then edge insertions sorted by source vertex.

    Args:
        rg (RgGraphStore): The graph to update; callers hold exclusive access.
        delta (GraphDelta): The batch.

    Returns:
        DeltaReport: Counts and the storage movement the update caused.

    Raises:
        DeltaError: If the delta is not applicable (nothing is modified then) or the
            store uses direct references.
    """
    if is_read_only(rg):
        raise DeltaError(f"graph {rg.name} uses direct references and is read-only")
    validate_delta(rg, delta)
    manager = rg.store.manager
    before = manager.counters()
    logger.info(
        f"🔀 Applying delta to {rg.name}: +{len(delta.add_vertices)}V -{len(delta.del_vertices)}V "
        f"+{len(delta.add_edges)}E -{len(delta.del_edges)}E"
    )
    try:
        _delete_edges(rg, list(delta.del_edges))
        _delete_vertices(rg, list(delta.del_vertices))
        _add_vertices(rg, list(delta.add_vertices))
        _add_edges(rg, list(delta.add_edges))
    except Exception as e:
        logger.exception(f"❌ Delta application on {rg.name} failed")
        raise e
    after = manager.counters()
    report = DeltaReport(
        added_vertices=len(delta.add_vertices),
        deleted_vertices=len(delta.del_vertices),
        added_edges=len(delta.add_edges),
        deleted_edges=len(delta.del_edges),
        **{k: after[k] - before[k] for k in ("moved_bytes", "reallocations", "promotions", "demotions")},
    )
    logger.info(f"✅ Delta applied to {rg.name}: {report.moved_bytes} bytes moved")
    return report
