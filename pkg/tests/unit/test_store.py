import pytest

from app.core.exceptions import DanglingRef, SchemaError, UnregisteredFragment
from app.models.schemas import FragmentStrategy, RefMode, StoreConfig
from app.models.values import Column, ColumnType
from app.store.arena import Fragment, SegmentHandle
from app.store.store import RgStore

# k INT + s STRING rows are 20 bytes wide (validity word, i64, u32 heap handle)
COLUMNS = [Column("k", ColumnType.INT), Column("s", ColumnType.STRING)]


def rows(start: int, n: int) -> list[tuple]:
    return [(k, f"s{k}") for k in range(start, start + n)]


@pytest.fixture
def store():
    s = RgStore(StoreConfig(block_size=200, segment_threshold=100))
    s.create_relation("T", COLUMNS)
    return s


def test_row_width(store):
    assert store.relation("T").row_width == 20


def test_new_fragment_and_scan(store):
    store.new_fragment("T", rows(0, 3))
    store.new_fragment("T", rows(3, 2))
    assert sorted(store.scan("T")) == rows(0, 5)
    assert store.count("T") == 5


def test_empty_fragment_is_shared_sentinel(store):
    fragment = store.new_fragment("T", [])
    assert fragment.is_empty_sentinel
    ref = store.make_ref(fragment, target="T")
    assert store.resolve(ref) == []
    assert store.relation("T").fragment_ids == []


def test_resolve_single_and_whole(store):
    fragment = store.new_fragment("T", rows(0, 3))
    assert store.resolve(store.make_ref(fragment)) == rows(0, 3)
    assert store.resolve(store.make_row_ref(fragment, 1)) == [(1, "s1")]


def test_first_append_reallocates_then_grows_in_place(store):
    fragment = store.new_fragment("T", rows(0, 2))
    first = store.append_to_fragment(fragment, rows(2, 1))
    assert first.moved_bytes == 40
    assert store.manager.counters()["reallocations"] == 1
    # capacity was rounded up to 1.5x of 60 bytes, so one more row fits
    second = store.append_to_fragment(fragment, rows(3, 1))
    assert second.moved_bytes == 0
    assert store.resolve(store.make_ref(fragment)) == rows(0, 4)


def test_promotion_to_blocks(store):
    fragment = store.new_fragment("T", rows(0, 3))
    assert fragment.is_segment
    result = store.append_to_fragment(fragment, rows(3, 3))
    assert not fragment.is_segment
    assert result.moved_bytes == 60
    assert store.manager.counters()["promotions"] == 1
    # block chains grow without moving bytes
    again = store.append_to_fragment(fragment, rows(6, 20))
    assert again.moved_bytes == 0
    assert store.resolve(store.make_ref(fragment)) == rows(0, 26)


def test_pure_block_strategy():
    store = RgStore(StoreConfig(block_size=200, segment_threshold=100, strategy=FragmentStrategy.PURE_BLOCK))
    store.create_relation("T", COLUMNS)
    fragment = store.new_fragment("T", rows(0, 1))
    assert not fragment.is_segment
    assert store.manager.reserved_bytes == 200


def test_pure_segment_never_promotes():
    store = RgStore(StoreConfig(block_size=200, segment_threshold=100, strategy=FragmentStrategy.PURE_SEGMENT))
    store.create_relation("T", COLUMNS)
    fragment = store.new_fragment("T", rows(0, 3))
    store.append_to_fragment(fragment, rows(3, 30))
    assert fragment.is_segment
    assert store.manager.counters()["promotions"] == 0


def test_indirect_ref_survives_relocation(store):
    fragment = store.new_fragment("T", rows(0, 2))
    store.new_fragment("T", rows(10, 1))
    ref = store.make_ref(fragment)
    store.append_to_fragment(fragment, rows(2, 1))
    assert store.resolve(ref) == rows(0, 3)


def test_direct_ref_goes_stale_after_relocation(store):
    fragment = store.new_fragment("T", rows(0, 2))
    store.new_fragment("T", rows(10, 1))
    ref = store.make_ref(fragment, mode=RefMode.DIRECT)
    assert store.resolve(ref) == rows(0, 2)
    store.append_to_fragment(fragment, rows(2, 1))
    with pytest.raises(DanglingRef):
        store.resolve(ref)


def test_delete_row_tombstones(store):
    fragment = store.new_fragment("T", rows(0, 3))
    single = store.make_row_ref(fragment, 1)
    store.delete_row(fragment, 1)
    assert sorted(store.scan("T")) == [(0, "s0"), (2, "s2")]
    with pytest.raises(DanglingRef):
        store.resolve(single)
    # the surviving offsets keep their meaning
    assert store.resolve(store.make_row_ref(fragment, 2)) == [(2, "s2")]


def test_remove_rows_to_empty_releases(store):
    fragment = store.new_fragment("T", rows(0, 3))
    kept, moved = store.remove_rows(fragment, [])
    assert kept is None
    assert moved == 0
    assert store.count("T") == 0


def test_demotion_below_threshold(store):
    fragment = store.new_fragment("T", rows(0, 8))
    assert not fragment.is_segment
    kept, _ = store.remove_rows(fragment, rows(0, 2))
    assert kept.is_segment
    assert store.manager.counters()["demotions"] == 1
    assert store.resolve(store.make_ref(kept)) == rows(0, 2)


def test_rewrite_to_nothing_demotes_to_an_empty_segment(store):
    fragment = store.new_fragment("T", rows(0, 8))
    assert not fragment.is_segment
    store.manager.rewrite(fragment, b"")
    assert fragment.is_segment
    assert fragment.tuple_count == 0
    assert store.manager.fid_at(store.manager.start_address(fragment)) == fragment.fid
    assert store.manager.counters()["demotions"] == 1
    assert store.resolve(store.make_ref(fragment)) == []


def test_schema_violations(store):
    with pytest.raises(SchemaError):
        store.new_fragment("T", [(1,)])
    with pytest.raises(SchemaError):
        store.new_fragment("T", [("x", "y")])
    with pytest.raises(SchemaError):
        store.create_relation("T", COLUMNS)


def test_row_wider_than_block_is_rejected():
    store = RgStore(StoreConfig(block_size=16, segment_threshold=8))
    with pytest.raises(SchemaError):
        store.create_relation("T", COLUMNS)


def test_unregistered_fragment(store):
    stranger = Fragment(99, "T", 20, SegmentHandle(0, 0))
    with pytest.raises(UnregisteredFragment):
        store.make_ref(stranger)


def test_storage_counters(store):
    store.new_fragment("T", rows(0, 2))
    store.new_fragment("T", rows(2, 6))
    counters = store.manager.counters()
    assert counters["data_bytes"] == 160
    assert counters["reserved_bytes"] == 40 + 200


# -----------------------
# regular form
# -----------------------


def _linked_store() -> RgStore:
    store = RgStore()
    store.create_relation("T", COLUMNS)
    store.create_relation("U", COLUMNS)
    store.create_relation("P", [Column("k", ColumnType.INT), Column("r", ColumnType.REF, "T")])
    return store


def test_regular_form_ok():
    store = _linked_store()
    a = store.new_fragment("T", rows(0, 2))
    b = store.new_fragment("T", rows(2, 2))
    store.new_fragment("P", [(1, store.make_ref(a)), (2, store.make_ref(b)), (3, store.make_ref(a))])
    report = store.validate_regular_form()
    assert report.ok
    assert report.violations == 0


def test_regular_form_overlap():
    store = _linked_store()
    a = store.new_fragment("T", rows(0, 2))
    store.new_fragment("P", [(1, store.make_ref(a)), (2, store.make_row_ref(a, 0))])
    report = store.validate_regular_form()
    assert not report.ok
    assert len(report.overlaps) == 1


def test_regular_form_direct_and_indirect_refs_agree():
    store = _linked_store()
    a = store.new_fragment("T", rows(0, 2))
    direct, indirect = store.make_ref(a, mode=RefMode.DIRECT), store.make_ref(a)
    assert direct != indirect
    assert store.referent_key(direct) == store.referent_key(indirect) == (a.fid, -1)
    store.new_fragment("P", [(1, direct), (2, indirect)])
    assert store.validate_regular_form().ok


def test_regular_form_overlap_across_forms():
    store = _linked_store()
    a = store.new_fragment("T", rows(0, 2))
    row_ref = store.make_row_ref(a, 1)
    store.new_fragment("P", [(1, store.make_ref(a, mode=RefMode.DIRECT)), (2, row_ref)])
    report = store.validate_regular_form()
    assert len(report.overlaps) == 1


def test_regular_form_heterogeneous_column():
    store = _linked_store()
    u = store.new_fragment("U", rows(0, 2))
    store.new_fragment("P", [(1, store.make_ref(u))])
    report = store.validate_regular_form()
    assert report.heterogeneous == [("P", "r")]
