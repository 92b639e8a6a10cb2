"""
Entity-resolution matchers for δ-joins. A matcher looks at two materialized relations
and returns the (left row, right row) index pairs it deems the same entity.
"""

import logging
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

from app.core.exceptions import ConfigError

logger = logging.getLogger(__name__)

_PUNCTUATION = re.compile(r"[^\w\s]")
_SPACES = re.compile(r"\s+")


@dataclass
class MaterializedRelation:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)

    def index(self, column: str) -> int:
        if column not in self.columns:
            raise ConfigError(f"matcher column {column} is not among {self.columns}")
        return self.columns.index(column)

    def __len__(self) -> int:
        return len(self.rows)


class ErMatcher(ABC):
    @abstractmethod
    def match(self, left: MaterializedRelation, right: MaterializedRelation) -> set[tuple[int, int]]:
        """Matched (left index, right index) pairs; deterministic and side-effect free."""


class ExactMatcher(ErMatcher):
    def __init__(self, key_l: str, key_r: str):
        self.key_l = key_l
        self.key_r = key_r

    def match(self, left: MaterializedRelation, right: MaterializedRelation) -> set[tuple[int, int]]:
        li, ri = left.index(self.key_l), right.index(self.key_r)
        by_key: dict = {}
        for j, row in enumerate(right.rows):
            if row[ri] is not None:
                by_key.setdefault(row[ri], []).append(j)
        return {(i, j) for i, row in enumerate(left.rows) for j in by_key.get(row[li], ())}

    def __repr__(self) -> str:
        return f"exact({self.key_l}={self.key_r})"


def normalize(text: str) -> str:
    """Lowercase, punctuation removed, whitespace collapsed and trimmed."""
    text = _PUNCTUATION.sub(" ", text.lower())
    return _SPACES.sub(" ", text).strip()


def tokens(text: str) -> frozenset[str]:
    return frozenset(normalize(text).split())


def jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


class FuzzyMatcher(ErMatcher):
    """Token-set Jaccard similarity of two string columns against a threshold."""

    def __init__(self, col_l: str, col_r: str, threshold: float = 0.8):
        if not 0.0 < threshold <= 1.0:
            raise ConfigError(f"fuzzy threshold {threshold} must lie in (0, 1]")
        self.col_l = col_l
        self.col_r = col_r
        self.threshold = threshold

    @staticmethod
    def _token_sets(relation: MaterializedRelation, column: str) -> list[Optional[frozenset]]:
        at = relation.index(column)
        out = []
        for row in relation.rows:
            value = row[at]
            if value is None:
                out.append(None)
            elif isinstance(value, str):
                out.append(tokens(value))
            else:
                raise ConfigError(f"fuzzy matcher needs strings in {column}, got {value!r}")
        return out

    def match(self, left: MaterializedRelation, right: MaterializedRelation) -> set[tuple[int, int]]:
        lsets = self._token_sets(left, self.col_l)
        rsets = self._token_sets(right, self.col_r)
        pairs = set()
        for i, a in enumerate(lsets):
            if a is None:
                continue
            for j, b in enumerate(rsets):
                if b is not None and jaccard(a, b) >= self.threshold:
                    pairs.add((i, j))
        logger.debug(f"fuzzy match {self.col_l}~{self.col_r}: {len(pairs)} pairs")
        return pairs

    def __repr__(self) -> str:
        return f"fuzzy({self.col_l}~{self.col_r}, {self.threshold})"


def exact_id_matcher(key_l: str, key_r: str) -> ErMatcher:
    return ExactMatcher(key_l, key_r)


def fuzzy_string_matcher(col_l: str, col_r: str, jaccard_threshold: float = 0.8) -> ErMatcher:
    return FuzzyMatcher(col_l, col_r, jaccard_threshold)


def build_matcher(kind: str, left: str, right: str, threshold: Optional[float] = None) -> ErMatcher:
    if kind == "exact":
        return exact_id_matcher(left, right)
    if kind == "fuzzy":
        return fuzzy_string_matcher(left, right, 0.8 if threshold is None else threshold)
    raise ConfigError(f"unknown matcher {kind}")
