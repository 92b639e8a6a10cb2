from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

PlainValue = Union[int, float, str, bool, None]


class RefForm(str, Enum):
    DIRECT = "direct"
    INDIRECT = "indirect"


@dataclass(frozen=True, slots=True)
class RefValue:
    """
    Opaque logical reference to a fragment (or to one tuple of a fragment).

    Indirect refs name a segment-table entry (`unit` is the fragment id) and survive
    reallocation. Direct refs carry the virtual byte address of the fragment start and
    go stale when the fragment moves. `offset` and `single` select one tuple.

    Two refs are equal iff they designate the same referent in the same addressing form.
    A RefValue is never equal to a plain value.
    """

    form: RefForm
    unit: int
    offset: int = 0
    single: bool = False
    target: str = ""
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        # hash fixed at construction
        object.__setattr__(self, "_hash", hash((self.form is RefForm.DIRECT, self.unit, self.offset, self.single, self.target)))

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        kind = "D" if self.form is RefForm.DIRECT else "I"
        if self.single:
            return f"&{kind}{self.unit}[{self.offset}]"
        return f"&{kind}{self.unit}"


class ColumnType(str, Enum):
    INT = "int"
    FLOAT = "float"
    STRING = "string"
    BOOL = "bool"
    REF = "ref"


@dataclass(frozen=True)
class Column:
    name: str
    type: ColumnType
    ref_target: Optional[str] = None

    @property
    def is_ref(self) -> bool:
        return self.type is ColumnType.REF


def infer_type(values) -> ColumnType:
    """Narrowest plain type holding every non-null value (int, float, bool, then string)."""
    seen = [v for v in values if v is not None]
    if not seen:
        return ColumnType.STRING
    if all(isinstance(v, bool) for v in seen):
        return ColumnType.BOOL
    if all(isinstance(v, int) and not isinstance(v, bool) for v in seen):
        return ColumnType.INT
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in seen):
        return ColumnType.FLOAT
    return ColumnType.STRING
