import logging
from collections import Counter
from typing import Iterable, Optional

from pydantic import BaseModel, Field

from app.graph.rg import RgGraphStore
from app.store.store import RgStore

logger = logging.getLogger(__name__)


class GraphStats(BaseModel):
    """
    Planner statistics. Keys are relation names, `relation.column` for ref columns and
    `relation.column@label` for per-label ref degrees.
    """

    counts: dict[str, int] = Field(default_factory=dict)
    linked: dict[str, int] = Field(default_factory=dict)
    degrees: dict[str, float] = Field(default_factory=dict)
    label_counts: dict[str, dict[str, int]] = Field(default_factory=dict)
    label_degrees: dict[str, float] = Field(default_factory=dict)
    distinct: dict[str, dict[str, int]] = Field(default_factory=dict)

    def cardinality(self, relation: str) -> Optional[int]:
        return self.counts.get(relation)

    def label_selectivity(self, relation: str, label: str) -> Optional[float]:
        total = self.counts.get(relation)
        histogram = self.label_counts.get(relation)
        if not total or histogram is None:
            return None
        return histogram.get(label, 0) / total

    def degree(self, relation: str, column: str, label: Optional[str] = None) -> Optional[float]:
        if label is not None:
            hit = self.label_degrees.get(f"{relation}.{column}@{label}")
            if hit is not None:
                return hit
        return self.degrees.get(f"{relation}.{column}")

    def ndv(self, relation: str, column: str) -> Optional[int]:
        return self.distinct.get(relation, {}).get(column)

    def merge(self, other: "GraphStats") -> "GraphStats":
        merged = self.model_copy(deep=True)
        for name in ("counts", "linked", "degrees", "label_counts", "label_degrees", "distinct"):
            getattr(merged, name).update(getattr(other, name))
        return merged


def _distinct_counts(rows: list[tuple], names: list[str]) -> dict[str, int]:
    return {name: len({r[i] for r in rows}) for i, name in enumerate(names)}


def collect_relation_stats(store: RgStore, names: Iterable[str]) -> GraphStats:
    """Counts and per-column distinct counts of plain relations."""
    stats = GraphStats()
    for name in names:
        relation = store.relation(name)
        rows = list(store.scan(name))
        stats.counts[name] = len(rows)
        plain = [(i, c.name) for i, c in enumerate(relation.schema.columns) if not c.is_ref]
        stats.distinct[name] = {
            col: len({r[i] for r in rows}) for i, col in plain
        }
    return stats


def collect_stats(rg: RgGraphStore, extra: Iterable[str] = ()) -> GraphStats:
    """
    Collects tuple counts, label histograms, ref-column link counts and mean degrees
    (overall and per label) for a graph, plus counts and distinct values for `extra`
    plain relations of the same store.
    """
    store = rg.store
    stats = collect_relation_stats(store, extra)
    v_rows = rg.vertex_rows()
    stats.counts[rg.d_v] = len(v_rows)
    stats.label_counts[rg.d_v] = dict(Counter(r[1] for r in v_rows))
    stats.distinct[rg.d_v] = _distinct_counts([r[:2] for r in v_rows], ["vid", "label"])

    per_label: dict[tuple[str, str], int] = Counter()
    out_labels: Counter = Counter()
    in_labels: Counter = Counter()
    for column, index, labels in (("out_L", 2, out_labels), ("in_L", 3, in_labels)):
        total = 0
        for row in v_rows:
            fragment = store.resolve(row[index])
            total += len(fragment)
            per_label[(column, row[1])] += len(fragment)
            labels.update(e[1] for e in fragment)
        stats.linked[f"{rg.d_v}.{column}"] = total
        stats.degrees[f"{rg.d_v}.{column}"] = total / len(v_rows) if v_rows else 0.0
    vertex_labels = stats.label_counts[rg.d_v]
    for (column, label), total in per_label.items():
        stats.label_degrees[f"{rg.d_v}.{column}@{label}"] = total / vertex_labels[label]

    for relation, column, labels in ((rg.d_out, "dst_L", out_labels), (rg.d_in, "src_L", in_labels)):
        count = sum(labels.values())
        stats.counts[relation] = count
        stats.label_counts[relation] = dict(labels)
        stats.linked[f"{relation}.{column}"] = count
        stats.degrees[f"{relation}.{column}"] = 1.0 if count else 0.0
        stats.distinct[relation] = {"eid": count, "label": len(labels)}

    for table in (rg.v_attrs, rg.e_attrs):
        for relation in table.values():
            rows = [r for r in store.fragment_rows(rg.attr_fragments[relation]) if r is not None]
            stats.counts[relation] = len(rows)
            stats.distinct[relation] = _distinct_counts(rows, store.relation(relation).schema.names)
    logger.debug(f"stats for {rg.name}: {stats.counts}")
    return stats


def candidate_vids(
    rg: RgGraphStore, label: Optional[str], min_out: int = 0, min_in: int = 0
) -> list[int]:
    """
    Default candidate generation: vertices carrying `label` whose out- and in-degree
    reach the pattern vertex's degrees.
    """
    out = []
    for row in rg.vertex_rows():
        if label is not None and row[1] != label:
            continue
        if min_out and len(rg.store.resolve(row[2])) < min_out:
            continue
        if min_in and len(rg.store.resolve(row[3])) < min_in:
            continue
        out.append(row[0])
    return sorted(out)
