"""
Discrete square-lattice domains with holes, and their double covers.

Vertices, cells and edges use integer coordinates; the mesh size only
enters geometry (tips, corner positions, H increments). A vertex has four
slots E, N, W, S, each filled by an interior edge or a boundary half-edge.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx

from backend.config.settings import settings
from backend.services.qcyc import Q8Number
from backend.utils.errors import (
    DisconnectedFaces,
    EmptyFaceSet,
    FlagArityMismatch,
    ToolkitInputError,
    WalkLeavesDomain,
)

logger = logging.getLogger(__name__)

Vertex = Tuple[int, int]
Cell = Tuple[int, int]

E, N, W, S = 0, 1, 2, 3
DIRECTION_NAMES = "ENWS"
STEP = ((1, 0), (0, 1), (-1, 0), (0, -1))

# eta of an outward half-edge as a power of zeta; south-directed gives 1
ETA_EXPONENT = {E: 7, N: 6, W: 5, S: 0}

# corner k sits between slots k and k+1, inside this cell offset from v
CORNER_CELL_OFFSET = ((0, 0), (-1, 0), (-1, -1), (0, -1))

# quarter-turn value of a heading change (out - in) mod 4
TURN = (0, 1, 0, -1)


def direction_from_name(name: str) -> int:
    if len(name) == 1 and name.upper() in DIRECTION_NAMES:
        return DIRECTION_NAMES.index(name.upper())
    raise ToolkitInputError(f"unknown direction: {name!r}")


def step(v: Vertex, d: int) -> Vertex:
    dx, dy = STEP[d]
    return (v[0] + dx, v[1] + dy)


@dataclass(frozen=True, order=True)
class Edge:
    """Interior edge; v1 is the west or south end."""
    v1: Vertex
    v2: Vertex

    @classmethod
    def from_slot(cls, v: Vertex, d: int) -> Edge:
        w = step(v, d)
        return cls(v, w) if d in (E, N) else cls(w, v)

    @property
    def direction(self) -> int:
        return E if self.v1[1] == self.v2[1] else N

    def midpoint(self, delta: Fraction = Fraction(1)) -> complex:
        x = (self.v1[0] + self.v2[0]) / 2
        y = (self.v1[1] + self.v2[1]) / 2
        return complex(x * float(delta), y * float(delta))


@dataclass(frozen=True, order=True)
class HalfEdge:
    """Boundary half-edge from an inner vertex towards its tip."""
    vertex: Vertex
    direction: int

    @property
    def name(self) -> str:
        return DIRECTION_NAMES[self.direction]

    def tip(self, delta: Fraction = Fraction(1)) -> complex:
        dx, dy = STEP[self.direction]
        x = self.vertex[0] + dx / 2
        y = self.vertex[1] + dy / 2
        return complex(x * float(delta), y * float(delta))


Point = Union[Edge, HalfEdge]


def point_key(p: Point) -> tuple:
    if isinstance(p, Edge):
        return (0, p.v1, p.v2)
    return (1, p.vertex, p.direction)


def describe_point(p: Point) -> Dict:
    if isinstance(p, Edge):
        return {"edge": [list(p.v1), list(p.v2)]}
    return {"vertex": list(p.vertex), "dir": p.name}


@dataclass(frozen=True, order=True)
class Corner:
    vertex: Vertex
    index: int

    @property
    def cell(self) -> Cell:
        ox, oy = CORNER_CELL_OFFSET[self.index]
        return (self.vertex[0] + ox, self.vertex[1] + oy)


@dataclass(frozen=True)
class CoverPoint:
    point: Point
    sheet: int = 1

    def star(self) -> CoverPoint:
        return CoverPoint(self.point, -self.sheet)


@dataclass(frozen=True)
class BoundaryEvent:
    kind: str  # "edge" or "whisker"
    vertex: Vertex
    direction: int  # travel direction for edges, outward direction for whiskers
    heading: int


@dataclass(frozen=True)
class DiscreteDomain:
    delta: Fraction
    faces: FrozenSet[Cell]
    vertices: Tuple[Vertex, ...]
    edges: Tuple[Edge, ...]
    half_edges: Tuple[HalfEdge, ...]
    holes: Tuple[FrozenSet[Cell], ...]
    _cache: Dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @cached_property
    def vertex_set(self) -> FrozenSet[Vertex]:
        return frozenset(self.vertices)

    @cached_property
    def edge_index(self) -> Dict[Edge, int]:
        return {e: i for i, e in enumerate(self.edges)}

    @cached_property
    def half_edge_set(self) -> FrozenSet[HalfEdge]:
        return frozenset(self.half_edges)

    @cached_property
    def points(self) -> Tuple[Point, ...]:
        return tuple(self.edges) + tuple(self.half_edges)

    @cached_property
    def corners(self) -> Tuple[Corner, ...]:
        return tuple(Corner(v, k) for v in self.vertices for k in range(4))

    @cached_property
    def bounding_box(self) -> Tuple[int, int, int, int]:
        xs = [c[0] for c in self.faces]
        ys = [c[1] for c in self.faces]
        return min(xs), max(xs), min(ys), max(ys)

    def slot(self, v: Vertex, d: int) -> Optional[Point]:
        edge = Edge.from_slot(v, d)
        if edge in self.edge_index:
            return edge
        half = HalfEdge(v, d)
        if half in self.half_edge_set:
            return half
        return None

    @cached_property
    def complement_components(self) -> Dict[Cell, int]:
        """Component id of every complement cell in the padded box; -1 is outside."""
        x0, x1, y0, y1 = self.bounding_box
        grid = nx.grid_2d_graph(range(x0 - 1, x1 + 2), range(y0 - 1, y1 + 2))
        grid.remove_nodes_from(self.faces)
        labels: Dict[Cell, int] = {}
        outside = nx.node_connected_component(grid, (x0 - 1, y0 - 1))
        for cell in outside:
            labels[cell] = -1
        for index, hole in enumerate(self.holes):
            for cell in hole:
                labels[cell] = index
        return labels

    def component_of_cell(self, cell: Cell) -> int:
        return self.complement_components.get(cell, -1)

    def component_of_half_edge(self, half: HalfEdge) -> int:
        """-1 for the outer boundary, otherwise the hole index."""
        v, d = half.vertex, half.direction
        cell = Corner(v, d).cell
        return self.component_of_cell(cell)

    def dual_cut(self, start: Cell, strategy: Optional[str] = None) -> FrozenSet[Tuple[Vertex, int]]:
        """Half-edges (v, d) crossed an odd number of times by a dual path to the outside."""
        strategy = strategy or settings.CUT_STRATEGY
        key = ("cut", start, strategy)
        if key in self._cache:
            return self._cache[key]
        x0, x1, y0, y1 = self.bounding_box
        if strategy == "shortest":
            grid = nx.grid_2d_graph(range(x0 - 1, x1 + 2), range(y0 - 1, y1 + 2))
            sink = "outside"
            for cell in list(grid.nodes):
                if cell[0] in (x0 - 1, x1 + 1) or cell[1] in (y0 - 1, y1 + 1):
                    grid.add_edge(cell, sink)
            path = nx.shortest_path(grid, start, sink)[:-1]
        elif strategy == "vertical":
            path = [(start[0], y) for y in range(start[1], y0 - 2, -1)]
        else:
            raise ToolkitInputError(f"unknown cut strategy: {strategy}")

        crossed = set()
        for here, there in zip(path, path[1:]):
            half = _crossed_half(here, there)
            if half[0] in self.vertex_set:
                crossed ^= {half}
        result = frozenset(crossed)
        self._cache[key] = result
        return result

    def hole_cut_bits(self, strategy: Optional[str] = None) -> Dict[Tuple[Vertex, int], int]:
        """Bitmask of holes whose cut crosses each half-edge."""
        strategy = strategy or settings.CUT_STRATEGY
        key = ("hole_bits", strategy)
        if key not in self._cache:
            bits: Dict[Tuple[Vertex, int], int] = {}
            for index, hole in enumerate(self.holes):
                for half in self.dual_cut(min(hole), strategy):
                    bits[half] = bits.get(half, 0) | (1 << index)
            self._cache[key] = bits
        return self._cache[key]

    @cached_property
    def outer_boundary(self) -> Tuple[BoundaryEvent, ...]:
        """Counterclockwise walk around the outer boundary, whiskers included."""
        v0 = min(self.vertices, key=lambda v: (v[1], v[0]))
        events = [BoundaryEvent("edge", v0, E, E)]
        v, t = step(v0, E), E
        while True:
            out = None
            for turn in (3, 0, 1, 2):
                r = (t + turn) % 4
                p = self.slot(v, r)
                if isinstance(p, Edge):
                    out = r
                    break
                events.append(BoundaryEvent("whisker", v, r, (r + 1) % 4))
            if out is None:
                raise ToolkitInputError(f"isolated vertex {v} on the outer boundary")
            if v == v0 and out == E:
                break
            events.append(BoundaryEvent("edge", v, out, out))
            v, t = step(v, out), out
        return tuple(events)

    @cached_property
    def outer_whisker_positions(self) -> Dict[HalfEdge, int]:
        return {
            HalfEdge(ev.vertex, ev.direction): i
            for i, ev in enumerate(self.outer_boundary)
            if ev.kind == "whisker"
        }

    def is_outer(self, half: HalfEdge) -> bool:
        return half in self.outer_whisker_positions

    def _arc_events(self, a: HalfEdge, b: HalfEdge) -> List[BoundaryEvent]:
        events = self.outer_boundary
        i = self.outer_whisker_positions[a]
        j = self.outer_whisker_positions[b]
        count = (j - i) % len(events)
        return [events[(i + s) % len(events)] for s in range(count + 1)]

    def arc_winding(self, a: HalfEdge, b: HalfEdge) -> int:
        """Quarter-turns of the counterclockwise boundary arc from a to b."""
        arc = self._arc_events(a, b)
        return sum(TURN[(nxt.heading - cur.heading) % 4] for cur, nxt in zip(arc, arc[1:]))

    def arc_edges(self, a: HalfEdge, b: HalfEdge) -> List[Edge]:
        """Boundary edges strictly between a and b counterclockwise."""
        return [
            Edge.from_slot(ev.vertex, ev.direction)
            for ev in self._arc_events(a, b)
            if ev.kind == "edge"
        ]

    def outer_order(self, points: Sequence[HalfEdge]) -> bool:
        """True if the half-edges are outer and in counterclockwise order from the first."""
        if not all(self.is_outer(p) for p in points):
            return False
        start = self.outer_whisker_positions[points[0]]
        total = len(self.outer_boundary)
        offsets = [(self.outer_whisker_positions[p] - start) % total for p in points]
        return all(x < y for x, y in zip(offsets, offsets[1:]))


def _crossed_half(here: Cell, there: Cell) -> Tuple[Vertex, int]:
    """Half-edge (v1, d) of the lattice edge separating two adjacent cells."""
    x, y = here
    dx, dy = there[0] - x, there[1] - y
    if (dx, dy) == (0, -1):
        return ((x, y), E)
    if (dx, dy) == (0, 1):
        return ((x, y + 1), E)
    if (dx, dy) == (-1, 0):
        return ((x, y), N)
    return ((x + 1, y), N)


def _face_graph(faces: Iterable[Cell]) -> nx.Graph:
    faces = set(faces)
    graph = nx.Graph()
    graph.add_nodes_from(faces)
    for x, y in faces:
        for nb in ((x + 1, y), (x, y + 1)):
            if nb in faces:
                graph.add_edge((x, y), nb)
    return graph


def build_domain(faces: Iterable[Sequence[int]], delta: Union[str, Fraction, int] = 1) -> DiscreteDomain:
    """
    Build the minimal domain containing the given faces.

    Args:
        faces: integer cells (x, y), the cell with lower-left vertex (x, y)
        delta: mesh size

    Returns:
        DiscreteDomain with holes ordered by their smallest cell
    """
    cells = frozenset((int(c[0]), int(c[1])) for c in faces)
    if not cells:
        raise EmptyFaceSet("face set is empty")
    delta = Fraction(delta)
    if delta <= 0:
        raise ToolkitInputError(f"mesh size must be positive, got {delta}")
    if not nx.is_connected(_face_graph(cells)):
        raise DisconnectedFaces("faces are not edge-connected")

    vertices = set()
    edges = set()
    for x, y in cells:
        corners = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)]
        vertices.update(corners)
        edges.update({Edge((x, y), (x + 1, y)), Edge((x, y + 1), (x + 1, y + 1)),
                      Edge((x, y), (x, y + 1)), Edge((x + 1, y), (x + 1, y + 1))})
    half_edges = {
        HalfEdge(v, d)
        for v in vertices
        for d in range(4)
        if Edge.from_slot(v, d) not in edges
    }

    x0 = min(c[0] for c in cells)
    x1 = max(c[0] for c in cells)
    y0 = min(c[1] for c in cells)
    y1 = max(c[1] for c in cells)
    grid = nx.grid_2d_graph(range(x0 - 1, x1 + 2), range(y0 - 1, y1 + 2))
    grid.remove_nodes_from(cells)
    holes = [
        frozenset(component)
        for component in nx.connected_components(grid)
        if (x0 - 1, y0 - 1) not in component
    ]
    holes.sort(key=min)

    domain = DiscreteDomain(
        delta=delta,
        faces=cells,
        vertices=tuple(sorted(vertices)),
        edges=tuple(sorted(edges)),
        half_edges=tuple(sorted(half_edges)),
        holes=tuple(holes),
    )
    logger.debug(
        f"Built domain: {len(domain.vertices)} vertices, {len(domain.edges)} edges, "
        f"{len(domain.half_edges)} half-edges, {len(domain.holes)} holes"
    )
    return domain


def validate(domain: DiscreteDomain) -> List[str]:
    """Check the domain axioms; returns the list of violations (empty when valid)."""
    faults: List[str] = []
    vertex_set = set(domain.vertices)
    edge_set = set(domain.edges)
    half_set = set(domain.half_edges)

    for x, y in sorted(domain.faces):
        for v in [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)]:
            if v not in vertex_set:
                faults.append(f"face {(x, y)} misses vertex {v}")
        for e in [Edge((x, y), (x + 1, y)), Edge((x, y + 1), (x + 1, y + 1)),
                  Edge((x, y), (x, y + 1)), Edge((x + 1, y), (x + 1, y + 1))]:
            if e not in edge_set:
                faults.append(f"face {(x, y)} misses edge {e.v1}-{e.v2}")

    for v in domain.vertices:
        for d in range(4):
            has_edge = Edge.from_slot(v, d) in edge_set
            has_half = HalfEdge(v, d) in half_set
            if has_edge == has_half:
                faults.append(
                    f"vertex {v} slot {DIRECTION_NAMES[d]} has "
                    f"{'both an edge and a half-edge' if has_edge else 'neither edge nor half-edge'}"
                )

    for e in domain.edges:
        if e.v1 not in vertex_set or e.v2 not in vertex_set:
            faults.append(f"edge {e.v1}-{e.v2} has an endpoint outside the vertex set")
        if e.direction == E:
            incident = {(e.v1[0], e.v1[1]), (e.v1[0], e.v1[1] - 1)}
        else:
            incident = {(e.v1[0], e.v1[1]), (e.v1[0] - 1, e.v1[1])}
        if not incident & domain.faces:
            faults.append(f"edge {e.v1}-{e.v2} has no incident face")

    for h in domain.half_edges:
        if h.vertex not in vertex_set:
            faults.append(f"half-edge at {h.vertex} has no vertex")

    if domain.faces and not nx.is_connected(_face_graph(domain.faces)):
        faults.append("faces are not edge-connected")
    return faults


def eta_of(item: Union[HalfEdge, Corner]) -> Q8Number:
    """eta of a boundary half-edge, or eta_c squared for a corner.

    Both follow eta^2 = (i w)^(-1), w the unit vector from the vertex
    towards the half-edge tip or the corner.
    """
    if isinstance(item, HalfEdge):
        return Q8Number.zeta_power(ETA_EXPONENT[item.direction])
    return Q8Number.zeta_power(5 - 2 * item.index)


def corner_angle(k: int) -> float:
    """Argument of eta_c for corner k, so that eta_c^2 = zeta^(5 - 2k)."""
    return (5 - 2 * k) * math.pi / 8


@dataclass(frozen=True)
class DoubleCover:
    domain: DiscreteDomain
    branch_flags: Tuple[bool, ...]
    strategy: str = "shortest"
    base_sheet: int = 1

    @cached_property
    def branch_mask(self) -> int:
        return sum(1 << i for i, flag in enumerate(self.branch_flags) if flag)

    @property
    def is_trivial(self) -> bool:
        return self.branch_mask == 0

    @cached_property
    def _bits(self) -> Dict[Tuple[Vertex, int], int]:
        return self.domain.hole_cut_bits(self.strategy)

    def flip(self, v: Vertex, d: int) -> int:
        return bin(self._bits.get((v, d), 0) & self.branch_mask).count("1") & 1

    @cached_property
    def flip_edges(self) -> FrozenSet[Tuple[Vertex, int]]:
        return frozenset(half for half in self._bits if self.flip(*half))

    def edge_parity(self, edge: Edge) -> int:
        d = edge.direction
        return self.flip(edge.v1, d) ^ self.flip(edge.v2, (d + 2) % 4)

    def point_flip(self, p: Point) -> int:
        """Flip between the sheet at the inner vertex and the canonical sheet of p."""
        if isinstance(p, Edge):
            return self.flip(p.v1, p.direction)
        return self.flip(p.vertex, p.direction)

    def transport(self, walk: Sequence[Vertex], start_sheet: int = 1) -> int:
        sheet = start_sheet
        for here, there in zip(walk, walk[1:]):
            dx, dy = there[0] - here[0], there[1] - here[1]
            if (dx, dy) not in STEP:
                raise WalkLeavesDomain(f"step {here}->{there} is not a lattice step", {"step": [here, there]})
            d = STEP.index((dx, dy))
            edge = Edge.from_slot(here, d)
            if edge not in self.domain.edge_index:
                raise WalkLeavesDomain(f"step {here}->{there} leaves the domain", {"step": [here, there]})
            if self.edge_parity(edge):
                sheet = -sheet
        return sheet

    def arc_lift(self, a: CoverPoint, b: HalfEdge) -> CoverPoint:
        """Lift of b reached from a along the counterclockwise boundary arc."""
        parity = self.point_flip(a.point) + self.point_flip(b)
        parity += sum(self.edge_parity(e) for e in self.domain.arc_edges(a.point, b))
        return CoverPoint(b, a.sheet * (-1) ** (parity & 1))


def build_cover(domain: DiscreteDomain, branch_flags: Sequence[bool], strategy: Optional[str] = None) -> DoubleCover:
    flags = tuple(bool(f) for f in branch_flags)
    if len(flags) != len(domain.holes):
        raise FlagArityMismatch(
            f"expected {len(domain.holes)} branch flags, got {len(flags)}",
            {"holes": len(domain.holes), "flags": len(flags)},
        )
    return DoubleCover(domain, flags, strategy or settings.CUT_STRATEGY)


def transport(cover: DoubleCover, walk: Sequence[Vertex], start_sheet: int = 1) -> int:
    return cover.transport(walk, start_sheet)


def encloses(loop: Sequence[Vertex], point: Tuple[float, float]) -> bool:
    """Even-odd test for a closed lattice loop given as a vertex sequence."""
    px, py = point
    inside = False
    closed = list(loop) + [loop[0]] if loop[0] != loop[-1] else list(loop)
    for (x1, y1), (x2, y2) in zip(closed, closed[1:]):
        if (y1 > py) != (y2 > py):
            x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if x_cross > px:
                inside = not inside
    return inside


def fundamental_cycles(domain: DiscreteDomain) -> List[List[Vertex]]:
    graph = nx.Graph()
    graph.add_edges_from((e.v1, e.v2) for e in domain.edges)
    return nx.cycle_basis(graph)
