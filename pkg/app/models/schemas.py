from enum import Enum
from typing import Annotated, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

# -----------------------
# PYDANTIC MODELS
# -----------------------

Id = Annotated[int, Field(ge=0)]
Attr = Union[bool, int, float, str, None]


class FragmentStrategy(str, Enum):
    HETEROGENEOUS = "heterogeneous"
    PURE_SEGMENT = "pure_segment"
    PURE_BLOCK = "pure_block"


class RefMode(str, Enum):
    DIRECT = "direct"
    INDIRECT = "indirect"


class StoreConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    block_size: Annotated[int, Field(gt=0)] = 65536
    segment_threshold: Annotated[int, Field(gt=0)] = 8192
    segment_reserve_factor: Annotated[float, Field(ge=1.0)] = 1.5
    strategy: FragmentStrategy = FragmentStrategy.HETEROGENEOUS
    ref_mode: RefMode = RefMode.INDIRECT
    locality: bool = False

    @model_validator(mode="after")
    def threshold_fits_block(self):
        if self.segment_threshold > self.block_size:
            raise ValueError("segment_threshold must not exceed block_size")
        return self


class CostParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau: Annotated[float, Field(gt=0.0, le=1.0)] = 0.2
    kappa: Annotated[float, Field(ge=0.0)] = 1.0


class VertexRecord(BaseModel):
    vid: Id
    label: str
    attrs: Dict[str, Attr] = Field(default_factory=dict)


class EdgeRecord(BaseModel):
    eid: Id
    src: Id
    dst: Id
    label: str
    attrs: Dict[str, Attr] = Field(default_factory=dict)


class PropertyGraph(BaseModel):
    vertices: List[VertexRecord] = Field(default_factory=list)
    edges: List[EdgeRecord] = Field(default_factory=list)


class GraphDelta(BaseModel):
    add_vertices: List[VertexRecord] = Field(default_factory=list)
    del_vertices: List[Id] = Field(default_factory=list)
    add_edges: List[EdgeRecord] = Field(default_factory=list)
    del_edges: List[Id] = Field(default_factory=list)


class PatternVertex(BaseModel):
    var: str
    label: Optional[str] = None


class PatternEdge(BaseModel):
    var: Optional[str] = None
    src: str
    dst: str
    label: Optional[str] = None


class Pattern(BaseModel):
    vertices: List[PatternVertex]
    edges: List[PatternEdge] = Field(default_factory=list)

    @model_validator(mode="after")
    def vars_declared(self):
        names = [v.var for v in self.vertices] + [e.var for e in self.edges if e.var]
        if len(names) != len(set(names)):
            raise ValueError("pattern variables must be unique")
        declared = {v.var for v in self.vertices}
        for e in self.edges:
            if e.src not in declared or e.dst not in declared:
                raise ValueError(f"edge endpoint not declared: {e.src}->{e.dst}")
        return self


class PatternQuery(BaseModel):
    pattern: Pattern
    projection: List[Tuple[str, str]]

    @model_validator(mode="after")
    def projection_bound(self):
        known = {v.var for v in self.pattern.vertices} | {
            e.var for e in self.pattern.edges if e.var
        }
        for var, _ in self.projection:
            if var not in known:
                raise ValueError(f"projected variable {var} is not in the pattern")
        return self
