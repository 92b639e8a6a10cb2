from app.er.matchers import (
    ErMatcher,
    ExactMatcher,
    FuzzyMatcher,
    MaterializedRelation,
    build_matcher,
    exact_id_matcher,
    fuzzy_string_matcher,
)

__all__ = [
    "ErMatcher",
    "ExactMatcher",
    "FuzzyMatcher",
    "MaterializedRelation",
    "build_matcher",
    "exact_id_matcher",
    "fuzzy_string_matcher",
]
