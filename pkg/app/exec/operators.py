"""
Pipelined operators over chunk streams. Every operator is a generator pulling chunks
from its inputs; only hash-build sides and δ-join inputs are materialized.
"""

from collections import defaultdict
from itertools import repeat
from typing import Callable, Hashable, Iterable, Iterator, Optional

from app.core.exceptions import ExecError, RgError
from app.er.matchers import ErMatcher, MaterializedRelation
from app.exec.chunk import Chunk, chunked, rows_of
from app.models.values import RefValue

Resolve = Callable[[RefValue], list[tuple]]
Getter = Callable[[tuple], object]
Predicate = Callable[[tuple], bool]
Multiplicity = Callable[[tuple], int]


def _always(row: tuple) -> bool:
    return True


def ref_at(row: tuple, index: int) -> RefValue:
    ref = row[index]
    if not isinstance(ref, RefValue):
        raise ExecError(f"column {index} holds {ref!r}, not a reference")
    return ref


class ExploreHashCache:
    """
    Tables built over referent fragments, one per distinct referent. `key` maps a ref
    to its referent (the ref itself by default), so refs in different addressing forms
    share a table. A repeated ref gets back the table built for its first occurrence.
    """

    def __init__(self, build: Callable[[RefValue], object], key: Optional[Callable[[RefValue], Hashable]] = None):
        self.build = build
        self.key = key
        self.tables: dict[Hashable, object] = {}
        self.builds = 0
        self._last: Optional[RefValue] = None
        self._last_table = None

    def get(self, ref: RefValue):
        if ref is self._last:
            return self._last_table
        k = ref if self.key is None else self.key(ref)
        table = self.tables.get(k)
        if table is None:
            table = self.build(ref)
            self.tables[k] = table
            self.builds += 1
        self._last, self._last_table = ref, table
        return table


def explore_nl(
    chunks: Iterable[Chunk],
    ref_col: int,
    resolve: Resolve,
    theta: Predicate = _always,
    size: int = 2048,
    width: int = 0,
) -> Iterator[Chunk]:
    """Pairs each row with every tuple of the fragment its ref column designates."""

    def produce():
        for row in rows_of(chunks):
            for t in resolve(ref_at(row, ref_col)):
                out = row + t
                if theta(out):
                    yield out

    return chunked(produce(), size, width)


def fragment_table(resolve: Resolve, key: Getter) -> Callable[[RefValue], dict]:
    def build(ref: RefValue) -> dict:
        table: dict[Hashable, list[tuple]] = defaultdict(list)
        for t in resolve(ref):
            k = key(t)
            if k is not None:
                table[k].append(t)
        return table

    return build


def explore_hash(
    chunks: Iterable[Chunk],
    ref_col: int,
    resolve: Resolve,
    probe_key: Getter,
    build_key: Getter,
    theta: Predicate = _always,
    size: int = 2048,
    width: int = 0,
    cache: Optional[ExploreHashCache] = None,
) -> Iterator[Chunk]:
    """
    Exploration through per-fragment hash tables keyed by `build_key` over the referent
    tuples; input rows probe with `probe_key`. Same result bag as explore_nl with the
    key equality folded into θ.
    """
    cache = cache or ExploreHashCache(fragment_table(resolve, build_key))

    def produce():
        for row in rows_of(chunks):
            table = cache.get(ref_at(row, ref_col))
            k = probe_key(row)
            if k is None:
                continue
            for t in table.get(k, ()):
                out = row + t
                if theta(out):
                    yield out

    return chunked(produce(), size, width)


class Membership:
    """
    Counts the tuples of ψ(row[source_col]) that carry row[probe_col] in `field` and
    pass `keep`. The hashed form builds one value histogram per referent fragment and
    answers by lookup; the nl form rescans the fragment on every count.
    """

    def __init__(
        self,
        source_col: int,
        field: int,
        probe_col: int,
        resolve: Resolve,
        keep: Predicate = _always,
        hashed: bool = True,
        key: Optional[Callable[[RefValue], Hashable]] = None,
    ):
        self.source_col = source_col
        self.field = field
        self.probe_col = probe_col
        self.resolve = resolve
        self.keep = keep
        self.hashed = hashed
        self.cache = ExploreHashCache(self._histogram, key) if hashed else None

    def _histogram(self, ref: RefValue) -> dict:
        counts: dict = {}
        field, keep = self.field, self.keep
        for t in self.resolve(ref):
            value = t[field]
            if value is not None and keep(t):
                counts[value] = counts.get(value, 0) + 1
        return counts

    def bind(self, row: tuple) -> Optional[dict]:
        """The histogram this row's source ref selects, when the row holds the source and the form is hashed."""
        if self.cache is None or self.source_col >= len(row):
            return None
        return self.cache.get(ref_at(row, self.source_col))

    def __call__(self, row: tuple) -> int:
        value = row[self.probe_col]
        if value is None:
            return 0
        ref = ref_at(row, self.source_col)
        if self.cache is not None:
            return self.cache.get(ref).get(value, 0)
        field, keep = self.field, self.keep
        return sum(1 for t in self.resolve(ref) if t[field] == value and keep(t))


def membership_nl(
    source_col: int, field: int, probe_col: int, resolve: Resolve, keep: Predicate = _always
) -> Membership:
    """How many tuples of ψ(source) carry the probe value in `field`, scanning the fragment on every call."""
    return Membership(source_col, field, probe_col, resolve, keep, hashed=False)


def membership_hash(
    source_col: int,
    field: int,
    probe_col: int,
    resolve: Resolve,
    keep: Predicate = _always,
    key: Optional[Callable[[RefValue], Hashable]] = None,
) -> Membership:
    """membership_nl through a value histogram cached per referent fragment (`key` names the fragment)."""
    return Membership(source_col, field, probe_col, resolve, keep, hashed=True, key=key)


def multiplicity(row: tuple, memberships: Iterable[Multiplicity]) -> int:
    """Product of the membership counts; each explorative condition stands in for one pattern edge."""
    n = 1
    for m in memberships:
        n *= m(row)
        if not n:
            return 0
    return n


def ix_explore(
    chunks: Iterable[Chunk],
    ref_col: int,
    resolve: Resolve,
    memberships: list[Membership],
    theta: Predicate = _always,
    size: int = 2048,
    width: int = 0,
) -> Iterator[Chunk]:
    """
    Intersective exploration: explore_nl emitting each pair once per combination of
    edges that satisfy the explorative conditions; a pair is dropped when some
    condition finds no edge. The nl and hash variants differ in the memberships
    passed in (membership_nl or membership_hash).

    Hashed memberships whose source is already in the input row are bound once per
    row. Those whose probe is in the row too become a per-row factor; the others are
    looked up per referent tuple by column.
    """

    def produce():
        for row in rows_of(chunks):
            base = len(row)
            factor = 1
            lookups: list[tuple[dict, int]] = []
            rest: list[Membership] = []
            for m in memberships:
                table = m.bind(row)
                if table is None:
                    rest.append(m)
                elif m.probe_col < base:
                    factor *= table.get(row[m.probe_col], 0)
                else:
                    lookups.append((table, m.probe_col - base))
                if not factor:
                    break
            if not factor:
                continue
            for t in resolve(ref_at(row, ref_col)):
                n = factor
                for table, at in lookups:
                    n *= table.get(t[at], 0)
                    if not n:
                        break
                if not n:
                    continue
                out = row + t
                if not theta(out):
                    continue
                if rest:
                    n *= multiplicity(out, rest)
                if n == 1:
                    yield out
                elif n:
                    yield from repeat(out, n)

    return chunked(produce(), size, width)


def repeat_rows(chunks: Iterable[Chunk], memberships: list[Multiplicity], size: int = 2048, width: int = 0) -> Iterator[Chunk]:
    """Each row repeated by its membership multiplicity; used after value joins."""

    def produce():
        for row in rows_of(chunks):
            yield from repeat(row, multiplicity(row, memberships))

    return chunked(produce(), size, width)


def nl_join(
    left: Iterable[Chunk], right: Iterable[Chunk], theta: Predicate = _always, size: int = 2048, width: int = 0
) -> Iterator[Chunk]:
    def produce():
        inner = list(rows_of(right))
        for row in rows_of(left):
            for r in inner:
                out = row + r
                if theta(out):
                    yield out

    return chunked(produce(), size, width)


def hash_join(
    left: Iterable[Chunk],
    right: Iterable[Chunk],
    left_key: Getter,
    right_key: Getter,
    theta: Predicate = _always,
    build_left: bool = False,
    size: int = 2048,
    width: int = 0,
) -> Iterator[Chunk]:
    """Equi-join building a hash table on one input; output rows are left + right."""

    def build(rows: Iterable[tuple], key: Getter) -> dict:
        table: dict = defaultdict(list)
        for r in rows:
            k = key(r)
            if None not in k:
                table[k].append(r)
        return table

    def produce():
        if build_left:
            table = build(rows_of(left), left_key)
            for r in rows_of(right):
                for row in table.get(right_key(r), ()):
                    out = row + r
                    if theta(out):
                        yield out
        else:
            table = build(rows_of(right), right_key)
            for row in rows_of(left):
                for r in table.get(left_key(row), ()):
                    out = row + r
                    if theta(out):
                        yield out

    return chunked(produce(), size, width)


def filter_rows(chunks: Iterable[Chunk], predicate: Predicate, size: int = 2048, width: int = 0) -> Iterator[Chunk]:
    return chunked((r for r in rows_of(chunks) if predicate(r)), size, width)


def project(chunks: Iterable[Chunk], getters: list[Getter], size: int = 2048) -> Iterator[Chunk]:
    return chunked((tuple(g(r) for g in getters) for r in rows_of(chunks)), size, len(getters))


def delta_join(left: MaterializedRelation, right: MaterializedRelation, matcher: ErMatcher, a0: str) -> MaterializedRelation:
    """
    Left rows augmented with the attributes of every right row the matcher pairs them
    with, except the right side's entity id `a0`. Unmatched left rows are dropped.
    """
    try:
        pairs = sorted(matcher.match(left, right))
    except RgError:
        raise
    except Exception as e:
        raise ExecError(f"matcher {matcher!r} failed: {e}") from e
    drop = right.index(a0)
    columns = left.columns + [c for k, c in enumerate(right.columns) if k != drop]
    rows = [left.rows[i] + tuple(v for k, v in enumerate(right.rows[j]) if k != drop) for i, j in pairs]
    return MaterializedRelation(columns, rows)
