from app.graph.browse import Ontology, browse, extract_ontology
from app.graph.delta import DeltaReport, apply_delta
from app.graph.rg import RgGraphStore, content_signature, convert
from app.graph.stats import GraphStats, candidate_vids, collect_stats

__all__ = [
    "DeltaReport",
    "GraphStats",
    "Ontology",
    "RgGraphStore",
    "apply_delta",
    "browse",
    "candidate_vids",
    "collect_stats",
    "content_signature",
    "convert",
    "extract_ontology",
]
