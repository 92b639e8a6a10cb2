import random

import pytest

from app.core.exceptions import ExecError
from app.exec.chunk import Chunk, chunked, rows_of
from app.exec.operators import (
    ExploreHashCache,
    explore_hash,
    explore_nl,
    filter_rows,
    fragment_table,
    hash_join,
    ix_explore,
    membership_hash,
    membership_nl,
    nl_join,
    project,
)
from app.models.values import RefForm, RefValue

SIZES = [1, 7, 2048]
SEEDS = range(100)


def make_fragments(seed: int) -> tuple[list[RefValue], dict]:
    """Ten fragments of (key, payload) tuples, payloads drawn from a range overlapping the keys."""
    rng = random.Random(seed)
    refs = [RefValue(RefForm.INDIRECT, k) for k in range(10)]
    data = {ref: [(rng.randrange(5), rng.randrange(8)) for _ in range(rng.randrange(6))] for ref in refs}
    return refs, data


def make_rows(refs: list[RefValue], seed: int, n: int = 60) -> list[tuple]:
    """(id, key, ref) rows; ids are unique, refs repeat."""
    rng = random.Random(seed)
    return [(i, rng.choice([0, 1, 2, 3, 4, None]), rng.choice(refs)) for i in range(n)]


@pytest.fixture
def fragments():
    return make_fragments(11)


@pytest.fixture
def rows(fragments):
    return make_rows(fragments[0], 12)


def collect(chunks) -> list[tuple]:
    chunks = list(chunks)
    assert all(len(c) > 0 for c in chunks)
    return list(rows_of(chunks))


# -----------------------
# chunks
# -----------------------


@pytest.mark.parametrize("size", SIZES)
def test_chunked_respects_size(rows, size):
    chunks = list(chunked(rows, size, 3))
    assert all(0 < len(c) <= size for c in chunks)
    assert list(rows_of(chunks)) == rows


def test_empty_chunk_keeps_width():
    chunk = Chunk.from_rows([], 3)
    assert len(chunk) == 0
    assert chunk.columns == [[], [], []]
    assert list(chunked([], 4, 3)) == []


# -----------------------
# exploration
# -----------------------


def run_explore_pair(data: dict, rows: list[tuple], size: int) -> tuple[list[tuple], list[tuple]]:
    resolve = data.__getitem__
    nl = collect(
        explore_nl(
            chunked(rows, size, 3),
            2,
            resolve,
            lambda r: r[1] is not None and r[1] == r[3],
            size,
            5,
        )
    )
    hashed = collect(
        explore_hash(chunked(rows, size, 3), 2, resolve, lambda r: r[1], lambda t: t[0], size=size, width=5)
    )
    return nl, hashed


@pytest.mark.parametrize("size", SIZES)
def test_explore_hash_equals_explore_nl(fragments, rows, size):
    nl, hashed = run_explore_pair(fragments[1], rows, size)
    assert nl == hashed
    assert nl


@pytest.mark.parametrize("seed", SEEDS)
def test_explore_hash_equals_explore_nl_on_random_inputs(seed):
    refs, data = make_fragments(seed)
    rows = make_rows(refs, seed + 1000, n=random.Random(seed).randrange(1, 120))
    nl, hashed = run_explore_pair(data, rows, SIZES[seed % len(SIZES)])
    assert nl == hashed


def test_explore_nl_pairs_every_tuple(fragments, rows):
    _, data = fragments
    out = collect(explore_nl(chunked(rows, 2048, 3), 2, data.__getitem__))
    assert len(out) == sum(len(data[r[2]]) for r in rows)
    assert all(len(r) == 5 for r in out)


def test_explore_hash_builds_once_per_fragment(fragments, rows):
    _, data = fragments
    cache = ExploreHashCache(fragment_table(data.__getitem__, lambda t: t[0]))
    collect(explore_hash(chunked(rows, 7, 3), 2, data.__getitem__, lambda r: r[1], lambda t: t[0], cache=cache))
    assert cache.builds == len({r[2] for r in rows})


def test_cache_key_merges_refs_to_one_referent():
    indirect = RefValue(RefForm.INDIRECT, 3)
    direct = RefValue(RefForm.DIRECT, 4096)
    data = {indirect: [(1, 2)], direct: [(1, 2)]}
    cache = ExploreHashCache(fragment_table(data.__getitem__, lambda t: t[0]), key=lambda ref: 3)
    assert cache.get(indirect) is cache.get(direct)
    assert cache.builds == 1


def test_explore_rejects_plain_values():
    with pytest.raises(ExecError, match="not a reference"):
        collect(explore_nl(chunked([(1, 2)], 4, 2), 1, lambda ref: []))


def keep_even(t: tuple) -> bool:
    return t[1] % 2 == 0


def count_members(data: dict, ref: RefValue, value, keep=keep_even) -> int:
    return 0 if value is None else sum(1 for u in data[ref] if u[0] == value and keep(u))


def run_ix(membership, data: dict, rows: list[tuple], size: int, probe_cols: tuple[int, ...]) -> list[tuple]:
    resolve = data.__getitem__
    checks = [membership(2, 0, col, resolve, keep_even) for col in probe_cols]
    return collect(ix_explore(chunked(rows, size, 3), 2, resolve, checks, size=size, width=5))


@pytest.mark.parametrize("size", SIZES)
def test_membership_variants_agree(fragments, rows, size):
    _, data = fragments
    nl = run_ix(membership_nl, data, rows, size, (1,))
    hashed = run_ix(membership_hash, data, rows, size, (1,))
    assert nl == hashed
    expected = [r + t for r in rows for t in data[r[2]] for _ in range(count_members(data, r[2], r[1]))]
    assert nl == expected


@pytest.mark.parametrize("seed", SEEDS)
def test_ix_explore_variants_agree_on_random_inputs(seed):
    """Row-fixed and per-tuple memberships together, against a direct count over the pairs."""
    refs, data = make_fragments(seed)
    rows = make_rows(refs, seed + 2000, n=random.Random(seed).randrange(1, 120))
    size = SIZES[seed % len(SIZES)]
    probe_cols = (1, 4)
    nl = run_ix(membership_nl, data, rows, size, probe_cols)
    hashed = run_ix(membership_hash, data, rows, size, probe_cols)
    expected = []
    for r in rows:
        for t in data[r[2]]:
            out = r + t
            n = count_members(data, r[2], out[1]) * count_members(data, r[2], out[4])
            expected += [out] * n
    assert nl == hashed == expected


def test_membership_counts_parallel_tuples():
    ref = RefValue(RefForm.INDIRECT, 0)
    data = {ref: [(7, "a"), (7, "b"), (8, "c")]}
    rows = [(1, 7, ref), (2, 9, ref)]
    for membership in (membership_nl, membership_hash):
        check = membership(2, 0, 1, data.__getitem__)
        assert [check(r) for r in rows] == [2, 0]
        out = collect(ix_explore(chunked(rows, 4, 3), 2, data.__getitem__, [check]))
        assert [r[0] for r in out] == [1] * 6


def test_membership_hash_builds_once_per_referent(fragments, rows):
    _, data = fragments
    check = membership_hash(2, 0, 1, data.__getitem__)
    collect(ix_explore(chunked(rows, 7, 3), 2, data.__getitem__, [check]))
    assert check.cache.builds <= len({r[2] for r in rows})


def test_ix_explore_without_memberships_is_explore(fragments, rows):
    _, data = fragments
    plain = collect(explore_nl(chunked(rows, 7, 3), 2, data.__getitem__))
    assert collect(ix_explore(chunked(rows, 7, 3), 2, data.__getitem__, [])) == plain


# -----------------------
# joins
# -----------------------


def make_join_inputs(seed: int, n_left: int = 40, n_right: int = 25) -> tuple[list[tuple], list[tuple]]:
    rng = random.Random(seed)
    left = [(i, rng.choice([1, 2, 3, None])) for i in range(n_left)]
    right = [(rng.choice([1, 2, 3, 4, None]), 100 + j) for j in range(n_right)]
    return left, right


@pytest.fixture
def join_inputs():
    return make_join_inputs(13)


def run_join_pair(left: list[tuple], right: list[tuple], size: int, build_left: bool):
    nl = collect(
        nl_join(
            chunked(left, size, 2),
            chunked(right, size, 2),
            lambda r: r[1] is not None and r[1] == r[2],
            size,
            4,
        )
    )
    hashed = collect(
        hash_join(
            chunked(left, size, 2),
            chunked(right, size, 2),
            lambda r: (r[1],),
            lambda r: (r[0],),
            build_left=build_left,
            size=size,
            width=4,
        )
    )
    return nl, hashed


@pytest.mark.parametrize("size", SIZES)
@pytest.mark.parametrize("build_left", [False, True])
def test_hash_join_equals_nl_join(join_inputs, size, build_left):
    nl, hashed = run_join_pair(*join_inputs, size, build_left)
    assert sorted(nl) == sorted(hashed)
    assert nl


@pytest.mark.parametrize("seed", SEEDS)
def test_hash_join_equals_nl_join_on_random_inputs(seed):
    rng = random.Random(seed)
    left, right = make_join_inputs(seed + 3000, rng.randrange(0, 80), rng.randrange(0, 50))
    nl, hashed = run_join_pair(left, right, SIZES[seed % len(SIZES)], seed % 2 == 0)
    assert sorted(nl) == sorted(hashed)


def test_hash_join_applies_residual_theta(join_inputs):
    left, right = join_inputs
    out = collect(
        hash_join(
            chunked(left, 8, 2),
            chunked(right, 8, 2),
            lambda r: (r[1],),
            lambda r: (r[0],),
            theta=lambda r: r[3] % 2 == 0,
        )
    )
    assert out
    assert all(r[3] % 2 == 0 and r[1] == r[2] for r in out)


def test_nl_join_without_condition_is_cross_product(join_inputs):
    left, right = join_inputs
    assert len(collect(nl_join(chunked(left, 8, 2), chunked(right, 8, 2)))) == len(left) * len(right)


# -----------------------
# filter and project
# -----------------------


def test_filter_rows(rows):
    out = collect(filter_rows(chunked(rows, 7, 3), lambda r: r[0] % 3 == 0, 5, 3))
    assert [r[0] for r in out] == list(range(0, 60, 3))


def test_project(rows):
    chunks = list(project(chunked(rows, 7, 3), [lambda r: r[1], lambda r: r[0] * 2], 4))
    assert all(len(c.columns) == 2 for c in chunks)
    assert list(rows_of(chunks)) == [(r[1], r[0] * 2) for r in rows]
