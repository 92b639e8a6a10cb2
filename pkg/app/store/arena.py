"""
Heterogeneous fragment manager over one unified virtual address space.

Small fragments live in contiguous segments carved out of the address space by a
first-fit allocator; fragments at or above the segment threshold live in chains of
fixed-size blocks. The segment table (fragment id -> handle) is what Indirect refs
go through, so fragments may move without invalidating them.

Bytes are committed lazily: a unit only holds the rows written to it, while the
address space and the storage counters account for the full reserved size.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

from app.core.exceptions import SchemaError, UnregisteredFragment
from app.models.schemas import FragmentStrategy, StoreConfig

logger = logging.getLogger(__name__)

EMPTY_FID = 0
_ARENA_START = 64


@dataclass
class SegmentHandle:
    base: int
    capacity: int


@dataclass
class BlocksHandle:
    block_ids: list[int] = field(default_factory=list)


@dataclass
class Fragment:
    fid: int
    owner: str
    row_width: int
    handle: Union[SegmentHandle, BlocksHandle]
    tuple_count: int = 0
    version: int = 0

    @property
    def byte_size(self) -> int:
        return self.tuple_count * self.row_width

    @property
    def is_segment(self) -> bool:
        return isinstance(self.handle, SegmentHandle)

    @property
    def is_empty_sentinel(self) -> bool:
        return self.fid == EMPTY_FID


@dataclass
class Relocation:
    """Outcome of a write that may have moved a fragment."""

    moved_bytes: int = 0
    old_base: Optional[int] = None
    new_base: Optional[int] = None


class FragmentManager:
    def __init__(self, config: StoreConfig):
        self.config = config
        self.fragments: dict[int, Fragment] = {
            EMPTY_FID: Fragment(EMPTY_FID, "", 0, SegmentHandle(0, 0))
        }
        self._segments: dict[int, bytearray] = {EMPTY_FID: bytearray()}
        self._blocks: dict[int, bytearray] = {}
        self._block_addr: dict[int, int] = {}
        self._address_index: dict[int, int] = {0: EMPTY_FID}
        self._free: list[tuple[int, int]] = []
        self._next_address = _ARENA_START
        self._next_fid = 1
        self._next_block = 1

        self.moved_bytes = 0
        self.reallocations = 0
        self.promotions = 0
        self.demotions = 0

    # -----------------------
    # address space
    # -----------------------

    def _take(self, size: int) -> int:
        for i, (addr, free) in enumerate(self._free):
            if free >= size:
                if free > size:
                    self._free[i] = (addr + size, free - size)
                else:
                    self._free.pop(i)
                return addr
        addr = self._next_address
        self._next_address += size
        return addr

    def _give(self, addr: int, size: int):
        if size <= 0:
            return
        self._free.append((addr, size))
        self._free.sort()
        merged: list[tuple[int, int]] = []
        for a, s in self._free:
            if merged and merged[-1][0] + merged[-1][1] == a:
                merged[-1] = (merged[-1][0], merged[-1][1] + s)
            else:
                merged.append((a, s))
        if merged and merged[-1][0] + merged[-1][1] == self._next_address:
            self._next_address = merged.pop()[0]
        self._free = merged

    def rows_per_block(self, row_width: int) -> int:
        if row_width > self.config.block_size:
            raise SchemaError(
                f"row width {row_width}B exceeds block size {self.config.block_size}B"
            )
        return self.config.block_size // row_width

    def _wants_blocks(self, nbytes: int) -> bool:
        strategy = self.config.strategy
        if strategy is FragmentStrategy.PURE_BLOCK:
            return True
        if strategy is FragmentStrategy.PURE_SEGMENT:
            return False
        return nbytes >= self.config.segment_threshold

    # -----------------------
    # fragment lifecycle
    # -----------------------

    def get(self, fid: int) -> Fragment:
        fragment = self.fragments.get(fid)
        if fragment is None:
            raise UnregisteredFragment(f"fragment {fid} is not registered")
        return fragment

    def allocate(self, owner: str, row_width: int, data: bytes) -> Fragment:
        """
        Registers a new fragment holding `data` (whole rows of `row_width` bytes).

        An empty payload maps to the shared empty sentinel. Segments are sized exactly;
        blocks follow the chain layout.
        """
        nrows = len(data) // row_width if row_width else 0
        if nrows == 0:
            return self.fragments[EMPTY_FID]
        fid = self._next_fid
        self._next_fid += 1
        if self._wants_blocks(len(data)):
            fragment = Fragment(fid, owner, row_width, BlocksHandle(), 0)
            self.fragments[fid] = fragment
            self._write_blocks(fragment, data, nrows)
        else:
            base = self._take(len(data))
            fragment = Fragment(fid, owner, row_width, SegmentHandle(base, len(data)), nrows)
            self.fragments[fid] = fragment
            self._segments[fid] = bytearray(data)
            self._address_index[base] = fid
        return fragment

    def _new_block(self) -> int:
        block_id = self._next_block
        self._next_block += 1
        self._block_addr[block_id] = self._take(self.config.block_size)
        self._blocks[block_id] = bytearray()
        return block_id

    def _write_blocks(self, fragment: Fragment, data: bytes, nrows: int):
        handle = fragment.handle
        width = fragment.row_width
        per_block = self.rows_per_block(width)
        pos = 0
        if handle.block_ids:
            last = self._blocks[handle.block_ids[-1]]
            room = per_block - len(last) // width
            take = min(room, nrows)
            last += data[: take * width]
            pos = take
        while pos < nrows:
            block_id = self._new_block()
            if not handle.block_ids:
                self._address_index[self._block_addr[block_id]] = fragment.fid
            handle.block_ids.append(block_id)
            take = min(per_block, nrows - pos)
            self._blocks[block_id] += data[pos * width : (pos + take) * width]
            pos += take
        fragment.tuple_count += nrows

    def read(self, fragment: Fragment) -> bytes:
        if fragment.is_segment:
            return bytes(self._segments[fragment.fid][: fragment.byte_size])
        return b"".join(bytes(self._blocks[b]) for b in fragment.handle.block_ids)

    def _free_storage(self, fragment: Fragment):
        if fragment.is_segment:
            handle = fragment.handle
            self._address_index.pop(handle.base, None)
            self._give(handle.base, handle.capacity)
            self._segments.pop(fragment.fid, None)
        else:
            for i, block_id in enumerate(fragment.handle.block_ids):
                addr = self._block_addr.pop(block_id)
                if i == 0:
                    self._address_index.pop(addr, None)
                self._give(addr, self.config.block_size)
                self._blocks.pop(block_id, None)

    def _place_segment(self, fragment: Fragment, data: bytes, capacity: int):
        base = self._take(capacity)
        fragment.handle = SegmentHandle(base, capacity)
        self._segments[fragment.fid] = bytearray(data)
        self._address_index[base] = fragment.fid

    def append(self, fragment: Fragment, data: bytes) -> Relocation:
        """
        Appends whole rows to a registered fragment.

        Segment-form fragments grow in place while capacity allows, are reallocated with
        `segment_reserve_factor` headroom otherwise, and are promoted to blocks once they
        reach the threshold (heterogeneous strategy). Block chains never move existing
        bytes.
        """
        if fragment.is_empty_sentinel:
            raise UnregisteredFragment("the empty sentinel cannot grow; allocate a fragment")
        width = fragment.row_width
        nrows = len(data) // width
        outcome = Relocation()
        if nrows == 0:
            return outcome
        if not fragment.is_segment:
            self._write_blocks(fragment, data, nrows)
            fragment.version += 1
            return outcome

        handle = fragment.handle
        old_bytes = fragment.byte_size
        new_bytes = old_bytes + len(data)
        if self._wants_blocks(new_bytes):
            old = self.read(fragment)
            outcome.old_base = handle.base
            self._free_storage(fragment)
            fragment.handle = BlocksHandle()
            fragment.tuple_count = 0
            self._write_blocks(fragment, old + data, old_bytes // width + nrows)
            outcome.new_base = self.start_address(fragment)
            outcome.moved_bytes = old_bytes
            self.promotions += 1
            logger.debug(f"fragment {fragment.fid} promoted to blocks at {new_bytes}B")
        elif new_bytes <= handle.capacity:
            self._segments[fragment.fid] += data
            fragment.tuple_count += nrows
        else:
            old = self.read(fragment)
            outcome.old_base = handle.base
            self._free_storage(fragment)
            capacity = max(new_bytes, math.ceil(new_bytes * self.config.segment_reserve_factor))
            capacity = int(math.ceil(capacity / width) * width)
            self._place_segment(fragment, old + data, capacity)
            fragment.tuple_count += nrows
            outcome.new_base = fragment.handle.base
            outcome.moved_bytes = old_bytes
            self.reallocations += 1
        self.moved_bytes += outcome.moved_bytes
        fragment.version += 1
        return outcome

    def write_row(self, fragment: Fragment, index: int, row: bytes):
        """Overwrites one fixed-width row in place."""
        width = fragment.row_width
        if fragment.is_segment:
            self._segments[fragment.fid][index * width : (index + 1) * width] = row
        else:
            per_block = self.rows_per_block(width)
            block = self._blocks[fragment.handle.block_ids[index // per_block]]
            at = (index % per_block) * width
            block[at : at + width] = row
        fragment.version += 1

    def rewrite(self, fragment: Fragment, data: bytes) -> Relocation:
        """
        Replaces the fragment content by a shorter payload (row removal).

        Blocks-form fragments that fall below the threshold, including ones emptied
        outright, are demoted back into an exact segment (heterogeneous strategy).
        """
        width = fragment.row_width
        nrows = len(data) // width
        outcome = Relocation()
        if fragment.is_segment:
            self._segments[fragment.fid] = bytearray(data)
            fragment.tuple_count = nrows
        elif not self._wants_blocks(len(data)):
            outcome.old_base = self.start_address(fragment)
            self._free_storage(fragment)
            # an emptied fragment keeps one row of room so its address stays unique
            self._place_segment(fragment, data, len(data) or width)
            fragment.tuple_count = nrows
            outcome.new_base = fragment.handle.base
            outcome.moved_bytes = len(data)
            self.moved_bytes += len(data)
            self.demotions += 1
        else:
            self._free_storage(fragment)
            fragment.handle = BlocksHandle()
            fragment.tuple_count = 0
            if nrows:
                self._write_blocks(fragment, data, nrows)
            outcome.new_base = self.start_address(fragment)
        fragment.version += 1
        return outcome

    def release(self, fragment: Fragment):
        if fragment.is_empty_sentinel:
            return
        self._free_storage(fragment)
        del self.fragments[fragment.fid]

    # -----------------------
    # addressing
    # -----------------------

    def start_address(self, fragment: Fragment) -> int:
        if fragment.is_segment:
            return fragment.handle.base
        if not fragment.handle.block_ids:
            return 0
        return self._block_addr[fragment.handle.block_ids[0]]

    def end_address(self, fragment: Fragment) -> int:
        if fragment.is_segment:
            return fragment.handle.base + fragment.handle.capacity
        return self._block_addr[fragment.handle.block_ids[-1]] + self.config.block_size

    def fid_at(self, address: int) -> Optional[int]:
        return self._address_index.get(address)

    def adjacent(self, first: Fragment, second: Fragment) -> bool:
        if first.is_empty_sentinel or second.is_empty_sentinel:
            return False
        return self.end_address(first) == self.start_address(second)

    # -----------------------
    # accounting
    # -----------------------

    @property
    def reserved_bytes(self) -> int:
        total = 0
        for fragment in self.fragments.values():
            if fragment.is_segment:
                total += fragment.handle.capacity
            else:
                total += len(fragment.handle.block_ids) * self.config.block_size
        return total

    @property
    def data_bytes(self) -> int:
        return sum(f.byte_size for f in self.fragments.values())

    def counters(self) -> dict[str, int]:
        return {
            "reserved_bytes": self.reserved_bytes,
            "data_bytes": self.data_bytes,
            "moved_bytes": self.moved_bytes,
            "reallocations": self.reallocations,
            "promotions": self.promotions,
            "demotions": self.demotions,
        }

    # -----------------------
    # snapshot support
    # -----------------------

    def export_state(self) -> tuple[dict, list[bytes]]:
        units: list[bytes] = []
        table = []
        for fid in sorted(self.fragments):
            if fid == EMPTY_FID:
                continue
            f = self.fragments[fid]
            entry = {
                "fid": fid,
                "owner": f.owner,
                "row_width": f.row_width,
                "count": f.tuple_count,
                "version": f.version,
            }
            if f.is_segment:
                entry.update(form="segment", base=f.handle.base, capacity=f.handle.capacity)
                units.append(bytes(self._segments[fid]))
            else:
                entry.update(
                    form="blocks",
                    blocks=[[b, self._block_addr[b]] for b in f.handle.block_ids],
                )
                units.extend(bytes(self._blocks[b]) for b in f.handle.block_ids)
            table.append(entry)
        state = {
            "segment_table": table,
            "free": self._free,
            "next_address": self._next_address,
            "next_fid": self._next_fid,
            "next_block": self._next_block,
            "counters": {
                "moved_bytes": self.moved_bytes,
                "reallocations": self.reallocations,
                "promotions": self.promotions,
                "demotions": self.demotions,
            },
        }
        return state, units

    def import_state(self, state: dict, units: list[bytes]):
        pos = 0
        for entry in state["segment_table"]:
            fid = entry["fid"]
            if entry["form"] == "segment":
                handle = SegmentHandle(entry["base"], entry["capacity"])
                self._segments[fid] = bytearray(units[pos])
                self._address_index[handle.base] = fid
                pos += 1
            else:
                handle = BlocksHandle([b for b, _ in entry["blocks"]])
                for i, (block_id, addr) in enumerate(entry["blocks"]):
                    self._block_addr[block_id] = addr
                    self._blocks[block_id] = bytearray(units[pos])
                    if i == 0:
                        self._address_index[addr] = fid
                    pos += 1
            self.fragments[fid] = Fragment(
                fid, entry["owner"], entry["row_width"], handle, entry["count"], entry["version"]
            )
        self._free = [tuple(x) for x in state["free"]]
        self._next_address = state["next_address"]
        self._next_fid = state["next_fid"]
        self._next_block = state["next_block"]
        for key, value in state["counters"].items():
            setattr(self, key, value)
