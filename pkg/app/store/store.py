import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from app.core.exceptions import DanglingRef, NotFound, SchemaError
from app.models.schemas import RefMode, StoreConfig
from app.models.values import Column, RefForm, RefValue
from app.store.arena import EMPTY_FID, Fragment, FragmentManager
from app.store.relation import ExtendedRelation, ExtendedSchema, StringHeap

logger = logging.getLogger(__name__)


@dataclass
class AppendResult:
    fragment: Fragment
    moved_bytes: int = 0
    patches: list[tuple[int, int]] = field(default_factory=list)


@dataclass
class RegularFormReport:
    overlaps: list[tuple[RefValue, RefValue]] = field(default_factory=list)
    heterogeneous: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.overlaps and not self.heterogeneous

    @property
    def violations(self) -> int:
        return len(self.overlaps) + len(self.heterogeneous)


class RgStore:
    """
    An extended database: named extended relations whose tuples live in fragments of
    one heterogeneous fragment manager, plus the reference (make_ref) and dereference
    (resolve) functions over them.

    Single writer, many readers: callers serialize mutations.
    """

    def __init__(self, config: Optional[StoreConfig] = None):
        self.config = config or StoreConfig()
        self.manager = FragmentManager(self.config)
        self.relations: dict[str, ExtendedRelation] = {}
        self._cache: dict[int, tuple[int, list, list]] = {}

    # -----------------------
    # catalog
    # -----------------------

    def create_relation(
        self, name: str, columns: Sequence[Column], heap: Optional[StringHeap] = None
    ) -> ExtendedRelation:
        if name in self.relations:
            raise SchemaError(f"relation {name} already exists")
        relation = ExtendedRelation(ExtendedSchema(name, tuple(columns)), heap)
        self.manager.rows_per_block(relation.row_width)
        self.relations[name] = relation
        return relation

    def relation(self, name: str) -> ExtendedRelation:
        relation = self.relations.get(name)
        if relation is None:
            raise NotFound(f"unknown relation {name}")
        return relation

    def drop_relation(self, name: str):
        relation = self.relations.pop(name, None)
        if relation is None:
            return
        for fid in relation.fragment_ids:
            if fid in self.manager.fragments:
                self.manager.release(self.manager.fragments[fid])
            self._cache.pop(fid, None)

    @property
    def empty_fragment(self) -> Fragment:
        return self.manager.fragments[EMPTY_FID]

    # -----------------------
    # fragments
    # -----------------------

    def new_fragment(self, relation_name: str, rows: Iterable[Sequence]) -> Fragment:
        relation = self.relation(relation_name)
        data = relation.codec.encode(rows)
        fragment = self.manager.allocate(relation.name, relation.row_width, data)
        if not fragment.is_empty_sentinel:
            relation.fragment_ids.append(fragment.fid)
        return fragment

    def fragment(self, fid: int) -> Fragment:
        return self.manager.get(fid)

    def make_ref(
        self, fragment: Fragment, mode: Optional[RefMode] = None, target: Optional[str] = None
    ) -> RefValue:
        """
        Reference function: the ref designating all tuples of `fragment`.

        Args:
            fragment (Fragment): A registered fragment (the empty sentinel included).
            mode (Optional[RefMode]): Addressing form; the store default when omitted.
            target (Optional[str]): Target relation, required for the empty sentinel
                which belongs to no relation.

        Raises:
            UnregisteredFragment: If the fragment is not known to this store.
        """
        registered = self.manager.get(fragment.fid)
        mode = mode or self.config.ref_mode
        target = target or registered.owner
        if mode is RefMode.DIRECT:
            return RefValue(RefForm.DIRECT, self.manager.start_address(registered), 0, False, target)
        return RefValue(RefForm.INDIRECT, registered.fid, 0, False, target)

    def make_row_ref(
        self, fragment: Fragment, offset: int, mode: Optional[RefMode] = None
    ) -> RefValue:
        """The ref designating the single tuple at `offset` of `fragment`."""
        registered = self.manager.get(fragment.fid)
        mode = mode or self.config.ref_mode
        if mode is RefMode.DIRECT:
            return RefValue(RefForm.DIRECT, self.manager.start_address(registered), offset, True, registered.owner)
        return RefValue(RefForm.INDIRECT, registered.fid, offset, True, registered.owner)

    def _fid_of(self, ref: RefValue) -> int:
        if ref.form is RefForm.INDIRECT:
            if ref.unit not in self.manager.fragments:
                raise DanglingRef(f"{ref!r} names no registered fragment")
            return ref.unit
        fid = self.manager.fid_at(ref.unit)
        if fid is None:
            raise DanglingRef(f"{ref!r} points at a relocated or released fragment")
        return fid

    def referent_key(self, ref: RefValue) -> tuple[int, int]:
        """
        Fragment id and tuple offset (-1 for a whole fragment) of the referent. Direct
        and Indirect refs to the same referent share a key.

        Raises:
            DanglingRef: If the ref resolves to no fragment.
        """
        return self._fid_of(ref), ref.offset if ref.single else -1

    def fragment_of(self, ref: RefValue) -> Fragment:
        return self.manager.fragments[self._fid_of(ref)]

    def _decoded(self, fid: int) -> tuple[list, list]:
        fragment = self.manager.fragments[fid]
        hit = self._cache.get(fid)
        if hit is not None and hit[0] == fragment.version:
            return hit[1], hit[2]
        if fragment.is_empty_sentinel:
            rows: list = []
        else:
            relation = self.relations[fragment.owner]
            rows = relation.codec.decode(self.manager.read(fragment))
        live = [r for r in rows if r is not None]
        self._cache[fid] = (fragment.version, rows, live)
        return rows, live

    def resolve(self, ref: RefValue) -> list[tuple]:
        """
        Dereference function: the live tuples designated by `ref`.

        Raises:
            DanglingRef: If a Direct ref went stale or the referent tuple was deleted.
        """
        rows, live = self._decoded(self._fid_of(ref))
        if not ref.single:
            return live
        if ref.offset >= len(rows) or rows[ref.offset] is None:
            raise DanglingRef(f"{ref!r} designates a deleted tuple")
        return [rows[ref.offset]]

    def fragment_rows(self, fragment: Fragment) -> list[Optional[tuple]]:
        """Positional rows of a fragment, None for tombstones."""
        return self._decoded(fragment.fid)[0]

    def scan(self, relation_name: str) -> Iterator[tuple]:
        for fid in self.relation(relation_name).fragment_ids:
            yield from self._decoded(fid)[1]

    def count(self, relation_name: str) -> int:
        return sum(len(self._decoded(fid)[1]) for fid in self.relation(relation_name).fragment_ids)

    # -----------------------
    # mutation
    # -----------------------

    def append_to_fragment(self, fragment: Fragment, rows: Sequence[Sequence]) -> AppendResult:
        """
        Appends rows to a fragment, reallocating or promoting it as the manager decides.

        Args:
            fragment (Fragment): A registered, non-sentinel fragment.
            rows (Sequence[Sequence]): Rows conforming to the owner schema.

        Returns:
            AppendResult: The fragment, bytes moved, and (old, new) base-address patches
            for Direct refs.

        Raises:
            SchemaError: If a row does not conform to the owner schema.
        """
        fragment = self.manager.get(fragment.fid)
        relation = self.relation(fragment.owner)
        data = relation.codec.encode(rows)
        outcome = self.manager.append(fragment, data)
        patches = []
        if outcome.old_base is not None and outcome.old_base != outcome.new_base:
            patches.append((outcome.old_base, outcome.new_base))
        return AppendResult(fragment, outcome.moved_bytes, patches)

    def update_row(self, fragment: Fragment, offset: int, row: Sequence):
        relation = self.relation(fragment.owner)
        self.manager.write_row(fragment, offset, relation.codec.encode([row]))

    def overwrite_rows(self, fragment: Fragment, rows: Sequence[Sequence]):
        """Rewrites the first len(rows) rows of a fragment in place."""
        relation = self.relation(fragment.owner)
        data = relation.codec.encode(rows)
        width = relation.row_width
        for i in range(len(rows)):
            self.manager.write_row(fragment, i, data[i * width : (i + 1) * width])

    def delete_row(self, fragment: Fragment, offset: int):
        """Tombstones one tuple; its offset stays reserved so single-tuple refs keep meaning."""
        relation = self.relation(fragment.owner)
        current = self.fragment_rows(fragment)[offset]
        if current is None:
            return
        self.manager.write_row(fragment, offset, relation.codec.encode_deleted(current))

    def remove_rows(self, fragment: Fragment, keep: Sequence[Sequence]) -> tuple[Optional[Fragment], int]:
        """
        Compacts a fragment down to `keep`. Returns the fragment (None once emptied and
        released) and the bytes moved.
        """
        relation = self.relation(fragment.owner)
        if not keep:
            relation.fragment_ids.remove(fragment.fid)
            self.manager.release(fragment)
            self._cache.pop(fragment.fid, None)
            return None, 0
        outcome = self.manager.rewrite(fragment, relation.codec.encode(keep))
        return fragment, outcome.moved_bytes

    # -----------------------
    # regular form
    # -----------------------

    def validate_regular_form(self, names: Optional[Iterable[str]] = None) -> RegularFormReport:
        """
        Checks that referenced tuple sets are pairwise disjoint or identical and that
        every ref column targets a single relation.
        """
        report = RegularFormReport()
        owner_of_row: dict[tuple[int, int], tuple[tuple[int, int], RefValue]] = {}
        reported: set[tuple[RefValue, RefValue]] = set()
        seen: set[tuple[int, int]] = set()
        for name in sorted(names or self.relations):
            relation = self.relation(name)
            ref_cols = relation.schema.ref_columns()
            if not ref_cols:
                continue
            bad_columns: set[str] = set()
            for row in self.scan(name):
                for i, column in ref_cols:
                    ref = row[i]
                    if ref is None:
                        continue
                    try:
                        key = self.referent_key(ref)
                    except DanglingRef:
                        bad_columns.add(column.name)
                        continue
                    fid = key[0]
                    owner = self.manager.fragments[fid].owner
                    if ref.target != column.ref_target or owner not in ("", column.ref_target):
                        bad_columns.add(column.name)
                    if key in seen:
                        continue
                    seen.add(key)
                    rows = self.fragment_rows(self.manager.fragments[fid])
                    offsets = [ref.offset] if ref.single else [
                        k for k, r in enumerate(rows) if r is not None
                    ]
                    for k in offsets:
                        other_key, other = owner_of_row.setdefault((fid, k), (key, ref))
                        if other_key != key and (other, ref) not in reported:
                            reported.add((other, ref))
                            report.overlaps.append((other, ref))
            report.heterogeneous += [(name, c) for c in sorted(bad_columns)]
        if not report.ok:
            logger.warning(f"⚠️ Regular form violated: {report.violations} violation(s)")
        return report
