from app.store.arena import EMPTY_FID, Fragment, FragmentManager
from app.store.relation import ExtendedRelation, ExtendedSchema, StringHeap
from app.store.store import AppendResult, RegularFormReport, RgStore

__all__ = [
    "EMPTY_FID",
    "AppendResult",
    "ExtendedRelation",
    "ExtendedSchema",
    "Fragment",
    "FragmentManager",
    "RegularFormReport",
    "RgStore",
    "StringHeap",
]
