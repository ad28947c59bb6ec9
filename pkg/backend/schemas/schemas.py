"""
Request/response models shared by the CLI and the HTTP surface
"""

from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator

from backend.services.lattice_service import (
    CoverPoint,
    DiscreteDomain,
    DoubleCover,
    Edge,
    HalfEdge,
    Point,
    build_cover,
    build_domain,
    direction_from_name,
)


class HalfEdgeSpec(BaseModel):
    vertex: Tuple[int, int]
    dir: str

    @field_validator("dir")
    @classmethod
    def check_dir(cls, v: str) -> str:
        if v.upper() not in ("E", "N", "W", "S"):
            raise ValueError(f"unknown direction: {v!r}")
        return v.upper()

    def to_half_edge(self) -> HalfEdge:
        return HalfEdge(tuple(self.vertex), direction_from_name(self.dir))


class PointSpec(BaseModel):
    """Either an edge [[x1, y1], [x2, y2]] or a half-edge (vertex, dir); sheet +1 or -1."""
    edge: Optional[Tuple[Tuple[int, int], Tuple[int, int]]] = None
    vertex: Optional[Tuple[int, int]] = None
    dir: Optional[str] = None
    sheet: Literal[1, -1] = 1

    def to_point(self) -> Point:
        if self.edge is not None:
            v1, v2 = sorted((tuple(self.edge[0]), tuple(self.edge[1])))
            return Edge(v1, v2)
        if self.vertex is None or self.dir is None:
            raise ValueError("a point needs either 'edge' or both 'vertex' and 'dir'")
        return HalfEdge(tuple(self.vertex), direction_from_name(self.dir))

    def to_cover_point(self) -> CoverPoint:
        return CoverPoint(self.to_point(), self.sheet)


class DomainSpec(BaseModel):
    faces: List[Tuple[int, int]]
    delta: str = "1"
    branch: Optional[List[bool]] = None
    strategy: Optional[Literal["shortest", "vertical"]] = None

    @field_validator("delta")
    @classmethod
    def check_delta(cls, v: str) -> str:
        try:
            Fraction(v)
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"invalid mesh size {v!r}") from e
        return v

    def build(self) -> DiscreteDomain:
        return build_domain(self.faces, self.delta)

    def cover(self, domain: DiscreteDomain) -> DoubleCover:
        flags = self.branch if self.branch is not None else [False] * len(domain.holes)
        return build_cover(domain, flags, self.strategy)


class BoundaryConditionSpec(BaseModel):
    kind: Literal["plus", "free", "dobrushin", "alternating"] = "plus"
    marked: List[HalfEdgeSpec] = Field(default_factory=list)


# Requests
class ValidateRequest(BaseModel):
    domain: DomainSpec


class EnumerateRequest(BaseModel):
    domain: DomainSpec
    sources: List[PointSpec] = Field(default_factory=list)
    limit: int = 100


class PartitionRequest(BaseModel):
    domain: DomainSpec
    bc: BoundaryConditionSpec = Field(default_factory=BoundaryConditionSpec)
    components: List[Union[int, Tuple[int, int]]] = Field(default_factory=list)


class ObservableRequest(BaseModel):
    domain: DomainSpec
    source: HalfEdgeSpec
    marked: List[HalfEdgeSpec] = Field(default_factory=list)
    targets: Optional[List[PointSpec]] = None
    rule: Literal["NE", "NW"] = "NE"


class CheckRequest(BaseModel):
    domain: DomainSpec
    source: HalfEdgeSpec
    marked: List[HalfEdgeSpec] = Field(default_factory=list)
    witness: Optional[HalfEdgeSpec] = None
    compare_rules: bool = False
    flip_eta: bool = False


class SolveRequest(BaseModel):
    domain: DomainSpec
    source: HalfEdgeSpec
    compare: bool = True
    h_checks: bool = True
    homogeneous: bool = False


class ThetaRequest(BaseModel):
    punctures: List[str] = Field(default_factory=list)


class PfratioRequest(BaseModel):
    points: List[float]
    punctures: List[str] = Field(default_factory=list)


class ConvergeRequest(BaseModel):
    puncture: Tuple[float, float] = (0.5, 0.5)
    sizes: List[int] = Field(default_factory=lambda: [8, 16, 32])
    method: Literal["solver", "enumeration"] = "solver"
    a_height: Optional[float] = None
    b_height: Optional[float] = None
    hm_grid: Optional[int] = None
    output: Optional[str] = None
    timing: bool = True


class CatalogueRequest(BaseModel):
    flip_eta: bool = False
    solver: bool = True


# Responses
class ThetaResponse(BaseModel):
    lambdas: List[float] = Field(alias="lambda")
    residual: float
    theta: float

    model_config = {"populate_by_name": True}


class PfratioResponse(BaseModel):
    ratio: float


class ValidateResponse(BaseModel):
    valid: bool
    faults: List[str]
    vertices: int
    edges: int
    half_edges: int
    holes: int


class ReportResponse(BaseModel):
    label: str
    passed: bool = Field(alias="pass")
    checks: Dict[str, Dict[str, Any]]

    model_config = {"populate_by_name": True}
