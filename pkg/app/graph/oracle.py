"""Reference pattern-match semantics: naive backtracking over a PropertyGraph."""

from collections import defaultdict
from typing import Any

from app.models.schemas import PatternQuery, PropertyGraph


def _project(record, attr: str) -> Any:
    if attr in ("id", "vid", "eid"):
        return record.vid if hasattr(record, "vid") else record.eid
    if attr == "label":
        return record.label
    return record.attrs.get(attr)


def match_bruteforce(query: PatternQuery, graph: PropertyGraph) -> list[tuple]:
    """
    All homomorphic matches of the pattern, one row per assignment of pattern vertices
    to graph vertices and pattern edges to graph edges, projected on the query's
    (var, attr) list. Bag semantics: no deduplication.
    """
    pattern = query.pattern
    vertex_of = {v.vid: v for v in graph.vertices}
    out_edges: dict[int, list] = defaultdict(list)
    in_edges: dict[int, list] = defaultdict(list)
    for e in graph.edges:
        out_edges[e.src].append(e)
        in_edges[e.dst].append(e)
    labels = {v.var: v.label for v in pattern.vertices}
    edge_vars = [e.var or f"_e{i}" for i, e in enumerate(pattern.edges)]

    rows: list[tuple] = []
    h: dict[str, Any] = {}

    def vertex_ok(var: str, vid: int) -> bool:
        if var in h:
            return h[var] == vid
        label = labels[var]
        return label is None or vertex_of[vid].label == label

    def emit():
        out = []
        for var, attr in query.projection:
            bound = h[var]
            record = vertex_of[bound] if var in labels else bound
            out.append(_project(record, attr))
        rows.append(tuple(out))

    def isolated(rest: list[str]):
        if not rest:
            emit()
            return
        var = rest[0]
        for v in graph.vertices:
            if vertex_ok(var, v.vid):
                h[var] = v.vid
                isolated(rest[1:])
                del h[var]

    def extend(k: int):
        if k == len(pattern.edges):
            isolated([v.var for v in pattern.vertices if v.var not in h])
            return
        pe = pattern.edges[k]
        if pe.src in h:
            candidates = out_edges[h[pe.src]]
        elif pe.dst in h:
            candidates = in_edges[h[pe.dst]]
        else:
            candidates = graph.edges
        for e in candidates:
            if pe.label is not None and e.label != pe.label:
                continue
            if not vertex_ok(pe.src, e.src):
                continue
            fresh_src = pe.src not in h
            h[pe.src] = e.src
            if vertex_ok(pe.dst, e.dst):
                fresh_dst = pe.dst not in h
                h[pe.dst] = e.dst
                h[edge_vars[k]] = e
                extend(k + 1)
                del h[edge_vars[k]]
                if fresh_dst:
                    del h[pe.dst]
            if fresh_src:
                del h[pe.src]

    extend(0)
    return rows
