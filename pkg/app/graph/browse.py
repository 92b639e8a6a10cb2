import logging
from typing import Iterable, Optional

from pydantic import BaseModel, Field

from app.core.exceptions import NotFound
from app.graph.rg import RgGraphStore
from app.models.schemas import EdgeRecord, PropertyGraph, VertexRecord

logger = logging.getLogger(__name__)


class Ontology(BaseModel):
    vertex_labels: dict[str, list[str]] = Field(default_factory=dict)
    edge_labels: dict[str, list[str]] = Field(default_factory=dict)


def browse(
    rg: RgGraphStore, roots: Optional[Iterable[int]] = None, depth: Optional[int] = None
) -> PropertyGraph:
    """
    Reverses the conversion for the neighbourhood of `roots`.

    Returns the vertices within `depth` undirected hops of the roots and every edge
    incident to a vertex closer than `depth` (the edges the expansion walked).
    `roots=None` means every vertex; `depth=None` means no limit.

    Raises:
        NotFound: If a root vertex does not exist.
    """
    if roots is None:
        frontier = rg.vertex_ids()
    else:
        frontier = sorted(set(roots))
        for vid in frontier:
            if not rg.has_vertex(vid):
                raise NotFound(f"vertex {vid} not found in graph {rg.name}")

    distance = {vid: 0 for vid in frontier}
    edges: dict[int, EdgeRecord] = {}
    hop = 0
    while frontier and (depth is None or hop < depth):
        next_frontier = []
        for vid in frontier:
            for eid, label, ref in rg.out_rows(vid):
                other = rg.referent_id(ref)
                if eid not in edges:
                    edges[eid] = EdgeRecord(eid=eid, src=vid, dst=other, label=label, attrs=rg.edge_attrs(eid))
                if other not in distance:
                    distance[other] = hop + 1
                    next_frontier.append(other)
            for eid, label, ref in rg.in_rows(vid):
                other = rg.referent_id(ref)
                if eid not in edges:
                    edges[eid] = EdgeRecord(eid=eid, src=other, dst=vid, label=label, attrs=rg.edge_attrs(eid))
                if other not in distance:
                    distance[other] = hop + 1
                    next_frontier.append(other)
        frontier = next_frontier
        hop += 1

    vertices = [
        VertexRecord(vid=vid, label=rg.vertex_row(vid)[1], attrs=rg.vertex_attrs(vid))
        for vid in sorted(distance)
    ]
    logger.debug(f"browse {rg.name}: {len(vertices)} vertices, {len(edges)} edges")
    return PropertyGraph(vertices=vertices, edges=[edges[e] for e in sorted(edges)])


def extract_ontology(rg: RgGraphStore) -> Ontology:
    """Vertex and edge labels with their attribute names, read off the attribute catalogs."""
    return Ontology(
        vertex_labels={lb: [c.name for c in rg.attr_columns("V", lb)] for lb in sorted(rg.v_attrs)},
        edge_labels={lb: [c.name for c in rg.attr_columns("E", lb)] for lb in sorted(rg.e_attrs)},
    )
