"""
Flat snapshot files of a store: header, JSON catalog, then the raw unit bytes.

    magic "RGST" | version u32 | block_size u32 | segment_threshold u32
    catalog length u64 | catalog (UTF-8 JSON)
    unit count u64 | (unit length u64 | unit bytes)*

Little-endian throughout.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Optional

from app.core.exceptions import ConfigError, NotFound
from app.models.schemas import StoreConfig
from app.models.values import Column, ColumnType
from app.store.relation import StringHeap
from app.store.store import RgStore

logger = logging.getLogger(__name__)

MAGIC = b"RGST"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
_LEN = struct.Struct("<Q")


def _relation_catalog(store: RgStore) -> list[dict]:
    out = []
    for name, relation in store.relations.items():
        out.append(
            {
                "name": name,
                "columns": [
                    {"name": c.name, "type": c.type.value, "target": c.ref_target}
                    for c in relation.schema.columns
                ],
                "heap": relation.heap.values,
                "fragments": relation.fragment_ids,
            }
        )
    return out


def save_snapshot(path: str | Path, store: RgStore, meta: Optional[dict[str, Any]] = None) -> int:
    """
    Writes `store` (and caller metadata such as the graph catalog) to `path`.

    Returns:
        int: The number of bytes written.
    """
    state, units = store.manager.export_state()
    catalog = {
        "config": store.config.model_dump(mode="json"),
        "manager": state,
        "relations": _relation_catalog(store),
        "meta": meta or {},
    }
    payload = json.dumps(catalog, sort_keys=True).encode("utf-8")
    parts = [
        _HEADER.pack(MAGIC, VERSION, store.config.block_size, store.config.segment_threshold),
        _LEN.pack(len(payload)),
        payload,
        _LEN.pack(len(units)),
    ]
    for unit in units:
        parts += [_LEN.pack(len(unit)), unit]
    data = b"".join(parts)
    Path(path).write_bytes(data)
    logger.info(f"💾 Snapshot written to {path} ({len(data)} bytes)")
    return len(data)


def open_snapshot(path: str | Path) -> tuple[RgStore, dict[str, Any]]:
    """
    Restores a store written by `save_snapshot`.

    Raises:
        NotFound: If the file does not exist.
        ConfigError: If the file is not a snapshot of a supported version.
    """
    file = Path(path)
    if not file.exists():
        raise NotFound(f"no snapshot at {path}")
    data = file.read_bytes()
    if len(data) < _HEADER.size:
        raise ConfigError(f"{path} is not a snapshot file")
    magic, version, block_size, threshold = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ConfigError(f"{path} is not a snapshot file")
    if version != VERSION:
        raise ConfigError(f"unsupported snapshot version {version}")
    pos = _HEADER.size
    (size,) = _LEN.unpack_from(data, pos)
    pos += _LEN.size
    catalog = json.loads(data[pos : pos + size].decode("utf-8"))
    pos += size
    (count,) = _LEN.unpack_from(data, pos)
    pos += _LEN.size
    units = []
    for _ in range(count):
        (size,) = _LEN.unpack_from(data, pos)
        pos += _LEN.size
        units.append(data[pos : pos + size])
        pos += size

    config = StoreConfig(**catalog["config"])
    if (config.block_size, config.segment_threshold) != (block_size, threshold):
        raise ConfigError(f"{path}: header and catalog disagree on block sizes")
    store = RgStore(config)
    for entry in catalog["relations"]:
        columns = [
            Column(c["name"], ColumnType(c["type"]), c["target"]) for c in entry["columns"]
        ]
        relation = store.create_relation(entry["name"], columns, StringHeap(entry["heap"]))
        relation.fragment_ids = list(entry["fragments"])
    store.manager.import_state(catalog["manager"], units)
    logger.info(f"📂 Snapshot opened from {path}: {len(store.relations)} relations")
    return store, catalog["meta"]
