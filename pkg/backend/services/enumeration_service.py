"""
Exact enumeration of generalized configurations on a discrete domain.

Configurations with prescribed sources form a coset of the even-subgraph
cycle space; we walk it in Gray-code order from a spanning-tree
representative. Each configuration carries its size and, per hole, the
parity of its crossings with that hole's cut, so one enumeration serves
every double cover.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple, Union

import networkx as nx

from backend.config.settings import settings
from backend.services.lattice_service import (
    TURN,
    DiscreteDomain,
    DoubleCover,
    Edge,
    HalfEdge,
    Point,
    Vertex,
    step,
)
from backend.services.qcyc import ONE, X_CRIT, ZERO, Q8Number
from backend.utils.errors import (
    ComponentNotFound,
    InfeasibleSources,
    MarkedPointsNotOuterBoundary,
    SourcesNotInBoundaryOfS,
    ToolkitInputError,
)

logger = logging.getLogger(__name__)

# strand entering through slot r leaves through RESOLUTION_RULES[rule][r]
RESOLUTION_RULES = {
    "NE": (1, 0, 3, 2),
    "NW": (3, 2, 1, 0),
}

Component = Union[int, Tuple[int, int]]


@dataclass(frozen=True)
class Configuration:
    edges: FrozenSet[Edge]
    half_edges: FrozenSet[HalfEdge] = frozenset()
    tail: Optional[Tuple[Vertex, int]] = None  # half of an edge ending at its midpoint

    @property
    def size(self) -> int:
        # whiskers and the tail count half an edge each
        return len(self.edges) + (len(self.half_edges) + (1 if self.tail else 0)) // 2

    def degree(self, v: Vertex) -> int:
        count = 0
        for d in range(4):
            if Edge.from_slot(v, d) in self.edges or HalfEdge(v, d) in self.half_edges or self.tail == (v, d):
                count += 1
        return count


@dataclass
class PhaseDecomposition:
    path: List[Tuple[Vertex, int]]
    winding: int  # quarter-turns
    loops: List[List[Tuple[Vertex, int]]] = field(default_factory=list)
    loop_windings: List[int] = field(default_factory=list)
    loop_bits: List[int] = field(default_factory=list)
    path_sheet: int = 1
    end: Optional[tuple] = None


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str  # plus | free | alternating
    marked: Tuple[HalfEdge, ...] = ()

    @classmethod
    def plus(cls) -> BoundaryCondition:
        return cls("plus")

    @classmethod
    def free(cls) -> BoundaryCondition:
        return cls("free")

    @classmethod
    def dobrushin(cls, a: HalfEdge, b: HalfEdge) -> BoundaryCondition:
        return cls("alternating", (a, b))

    @classmethod
    def alternating(cls, points: Sequence[HalfEdge]) -> BoundaryCondition:
        return cls("alternating", tuple(points))


class _Tracer:
    """Follows strands of a configuration under a fixed degree-4 resolution rule."""

    def __init__(self, configuration: Configuration, rule: str = "NE",
                 arcs: Optional[Dict[HalfEdge, Tuple[HalfEdge, int]]] = None):
        self.edges = configuration.edges
        self.whiskers = configuration.half_edges
        self.tail = configuration.tail
        self.partner = RESOLUTION_RULES[rule]
        self.arcs = arcs or {}
        self.used_edges = set()
        self.used_whiskers = set()

    def _present(self, v: Vertex, d: int) -> bool:
        return (
            Edge.from_slot(v, d) in self.edges
            or HalfEdge(v, d) in self.whiskers
            or self.tail == (v, d)
        )

    def _choose(self, v: Vertex, t: int) -> int:
        r_in = (t + 2) % 4
        outs = [d for d in range(4) if d != r_in and self._present(v, d)]
        if len(outs) == 1:
            return outs[0]
        if len(outs) == 3:
            return self.partner[r_in]
        raise SourcesNotInBoundaryOfS(f"vertex {v} has odd degree in the configuration", {"vertex": list(v)})

    def run(self, v: Vertex, t: int, steps: List[Tuple[Vertex, int]],
            stop_whisker: Optional[HalfEdge] = None,
            stop_edge: Optional[Tuple[Vertex, int]] = None) -> Tuple[int, tuple]:
        q = 0
        while True:
            out = self._choose(v, t)
            q += TURN[(out - t) % 4]
            steps.append((v, out))
            if stop_edge is not None and (v, out) == stop_edge:
                return q, ("closed", None)
            edge = Edge.from_slot(v, out)
            if edge in self.edges:
                if edge in self.used_edges:
                    raise SourcesNotInBoundaryOfS(f"strand revisits edge {edge.v1}-{edge.v2}")
                self.used_edges.add(edge)
                v, t = step(v, out), out
                continue
            if self.tail == (v, out):
                return q, ("tail", (v, out))
            half = HalfEdge(v, out)
            self.used_whiskers.add(half)
            if half in self.arcs:
                partner, turn = self.arcs[half]
                q += turn
                if partner == stop_whisker:
                    return q, ("closed", partner)
                if partner in self.whiskers:
                    self.used_whiskers.add(partner)
                    v, t = partner.vertex, (partner.direction + 2) % 4
                    continue
                return q, ("arc", partner)
            return q, ("whisker", half)


def _lattice_loop_parity(cover: DoubleCover, steps: Sequence[Tuple[Vertex, int]]) -> int:
    return sum(cover.edge_parity(Edge.from_slot(v, d)) for v, d in steps) & 1


def _path_sheet(cover: DoubleCover, source: HalfEdge, source_sheet: int,
                steps: Sequence[Tuple[Vertex, int]]) -> int:
    """Canonical sheet reached at the end of a path started at the source tip."""
    parity = cover.flip(source.vertex, source.direction)
    for v, d in steps[:-1]:
        parity += cover.edge_parity(Edge.from_slot(v, d))
    if steps:
        v, d = steps[-1]
        parity += cover.flip(v, d)
    else:
        parity += cover.flip(source.vertex, source.direction)
    return source_sheet * (-1) ** (parity & 1)


def decompose(configuration: Configuration, source: HalfEdge, target: Point,
              cover: Optional[DoubleCover] = None, rule: str = "NE",
              source_sheet: int = 1) -> PhaseDecomposition:
    """Split a configuration into the path from source to target and loops."""
    tracer = _Tracer(configuration, rule)
    path: List[Tuple[Vertex, int]] = []
    winding = 0
    end = None
    if target != source:
        if source not in configuration.half_edges:
            raise SourcesNotInBoundaryOfS("source half-edge is not in the configuration")
        tracer.used_whiskers.add(source)
        winding, end = tracer.run(source.vertex, (source.direction + 2) % 4, path)
        if isinstance(target, Edge):
            reached = end[0] == "tail" and Edge.from_slot(*end[1]) == target
        else:
            reached = end == ("whisker", target)
        if not reached:
            raise SourcesNotInBoundaryOfS(f"path from the source ends at {end}, not at the target")

    decomposition = PhaseDecomposition(path=path, winding=winding, end=end)
    leftover = configuration.half_edges - tracer.used_whiskers - ({source} if target == source else set())
    if leftover:
        raise SourcesNotInBoundaryOfS(f"unmatched half-edges: {sorted(leftover)}")
    for edge in sorted(configuration.edges):
        if edge in tracer.used_edges:
            continue
        tracer.used_edges.add(edge)
        steps: List[Tuple[Vertex, int]] = []
        q, _ = tracer.run(edge.v2, edge.direction, steps, stop_edge=(edge.v1, edge.direction))
        decomposition.loops.append(steps)
        decomposition.loop_windings.append(q)

    if cover is not None:
        decomposition.loop_bits = [_lattice_loop_parity(cover, loop) for loop in decomposition.loops]
        decomposition.path_sheet = _path_sheet(cover, source, source_sheet, path)
    else:
        decomposition.path_sheet = source_sheet
    return decomposition


@dataclass
class SourceCounts:
    """Histograms of configurations for one boundary source."""
    source: HalfEdge
    # point -> Counter[(zeta exponent, size, hole parity bits)]
    counts: Dict[Point, Counter] = field(default_factory=dict)
    # vertex w -> Counter[(|U|, hole parity bits)] over the coset odd at {source vertex, w}
    cosets: Dict[Vertex, Counter] = field(default_factory=dict)


class ConfigurationSpace:
    """Cycle-space coordinates of the configurations of one domain."""

    def __init__(self, domain: DiscreteDomain, strategy: Optional[str] = None):
        self.domain = domain
        self.strategy = strategy or settings.CUT_STRATEGY
        vertices = domain.vertices
        self.vertex_index = {v: i for i, v in enumerate(vertices)}
        n = len(vertices)
        self.slot_edge = [-1] * (4 * n)
        self.slot_nbr = [-1] * (4 * n)
        for k, e in enumerate(domain.edges):
            d = e.direction
            i1, i2 = self.vertex_index[e.v1], self.vertex_index[e.v2]
            self.slot_edge[4 * i1 + d], self.slot_nbr[4 * i1 + d] = k, i2
            self.slot_edge[4 * i2 + d + 2], self.slot_nbr[4 * i2 + d + 2] = k, i1

        bits = domain.hole_cut_bits(self.strategy)
        self.half_bits = [bits.get((v, d), 0) for v in vertices for d in range(4)]
        self.edge_bits = []
        for e in domain.edges:
            d = e.direction
            i1, i2 = self.vertex_index[e.v1], self.vertex_index[e.v2]
            self.edge_bits.append(self.half_bits[4 * i1 + d] ^ self.half_bits[4 * i2 + d + 2])

        graph = nx.Graph()
        graph.add_nodes_from(range(n))
        for k, e in enumerate(domain.edges):
            graph.add_edge(self.vertex_index[e.v1], self.vertex_index[e.v2], index=k)
        self.root_mask = [0] * n
        tree = set()
        for parent, child in nx.bfs_edges(graph, 0):
            k = graph[parent][child]["index"]
            tree.add(k)
            self.root_mask[child] = self.root_mask[parent] ^ (1 << k)
        self.basis = []
        for k, e in enumerate(domain.edges):
            if k in tree:
                continue
            i1, i2 = self.vertex_index[e.v1], self.vertex_index[e.v2]
            self.basis.append((1 << k) ^ self.root_mask[i1] ^ self.root_mask[i2])
        self.basis_bits = [self.mask_bits(m) for m in self.basis]
        logger.debug(f"Cycle space of dimension {self.dimension} over {len(domain.edges)} edges")

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def half_bit(self, v: Vertex, d: int) -> int:
        return self.half_bits[4 * self.vertex_index[v] + d]

    def mask_bits(self, mask: int) -> int:
        out = 0
        k = 0
        while mask:
            if mask & 1:
                out ^= self.edge_bits[k]
            mask >>= 1
            k += 1
        return out

    def mask_to_edges(self, mask: int) -> FrozenSet[Edge]:
        edges = self.domain.edges
        return frozenset(edges[k] for k in range(len(edges)) if (mask >> k) & 1)

    def edges_to_mask(self, edges) -> int:
        index = self.domain.edge_index
        mask = 0
        for e in edges:
            mask ^= 1 << index[e]
        return mask

    def coset(self, odd_vertices: Sequence[Vertex]) -> Iterator[Tuple[int, int]]:
        """Yield (edge mask, hole parity bits) over every U odd exactly at the given vertices."""
        odd = set()
        for v in odd_vertices:
            odd ^= {self.vertex_index[v]}
        if len(odd) % 2:
            raise InfeasibleSources(f"odd number of odd-degree vertices ({len(odd)})")
        if self.dimension > settings.MAX_CYCLE_DIM:
            raise ToolkitInputError(
                f"cycle space of dimension {self.dimension} exceeds MAX_CYCLE_DIM={settings.MAX_CYCLE_DIM}"
            )
        mask = 0
        for i in odd:
            mask ^= self.root_mask[i]
        bits = self.mask_bits(mask)
        yield mask, bits
        basis, basis_bits = self.basis, self.basis_bits
        for i in range(1, 1 << len(basis)):
            j = (i & -i).bit_length() - 1
            mask ^= basis[j]
            bits ^= basis_bits[j]
            yield mask, bits

    def _walk(self, umask: int, extra: FrozenSet[int], i: int, t: int,
              stop: int = -1, partner: Tuple[int, ...] = RESOLUTION_RULES["NE"]) -> Tuple[int, int, int]:
        """Fast strand walk; returns (quarter-turns, last heading, last vertex index)."""
        slot_edge, slot_nbr = self.slot_edge, self.slot_nbr
        q = 0
        while True:
            base = 4 * i
            r_in = (t + 2) & 3
            outs = []
            for d in range(4):
                if d == r_in:
                    continue
                s = base + d
                e = slot_edge[s]
                if (e >= 0 and (umask >> e) & 1) or s in extra:
                    outs.append(d)
            if len(outs) == 1:
                out = outs[0]
            elif len(outs) == 3:
                out = partner[r_in]
            else:
                raise SourcesNotInBoundaryOfS(f"vertex {self.domain.vertices[i]} has odd degree")
            q += TURN[(out - t) & 3]
            s = base + out
            e = slot_edge[s]
            if e >= 0 and (umask >> e) & 1:
                i, t = slot_nbr[s], out
                if i == stop:
                    return q, t, i
                continue
            return q, out, i

    def _slot_point(self, s: int) -> Point:
        v = self.domain.vertices[s // 4]
        d = s % 4
        if self.slot_edge[s] >= 0:
            return self.domain.edges[self.slot_edge[s]]
        return HalfEdge(v, d)

    def source_counts(self, source: HalfEdge, vertices: Optional[Sequence[Vertex]] = None,
                      rule: str = "NE") -> SourceCounts:
        """
        Histogram every configuration of Conf_{a,z} for one boundary source a.

        Args:
            source: the boundary half-edge a
            vertices: restrict to targets whose path ends at these vertices
            rule: degree-4 resolution rule

        Returns:
            SourceCounts keyed by target point
        """
        partner = RESOLUTION_RULES[rule]
        ia = self.vertex_index[source.vertex]
        da = source.direction
        sa = 4 * ia + da
        a_bits = self.half_bits[sa]
        t_in = (da + 2) & 3
        slot_edge = self.slot_edge
        result = SourceCounts(source=source)
        counts: Dict[int, Counter] = defaultdict(Counter)
        plus = Counter()

        for w in (vertices if vertices is not None else self.domain.vertices):
            iw = self.vertex_index[w]
            base = 4 * iw
            histogram = Counter()

            def add(d: int, q: int, n: int, bits: int) -> None:
                s = base + d
                counts[s][((-q) & 7, n + 1, bits ^ a_bits ^ self.half_bits[s])] += 1

            for mask, bits in self.coset([source.vertex, w]):
                n = mask.bit_count()
                histogram[(n, bits)] += 1
                free = [
                    d for d in range(4)
                    if not (slot_edge[base + d] >= 0 and (mask >> slot_edge[base + d]) & 1)
                    and not (iw == ia and d == da)
                ]
                if iw == ia:
                    plus[(0, n, bits)] += 1
                    if len(free) == 3:
                        for d in free:
                            add(d, TURN[(d - t_in) & 3], n, bits)
                        continue
                elif len(free) == 3:
                    q_pre, t, _ = self._walk(mask, frozenset((sa,)), ia, t_in, stop=iw, partner=partner)
                    for d in free:
                        add(d, q_pre + TURN[(d - t) & 3], n, bits)
                    continue
                for d in free:
                    q, out, i = self._walk(mask, frozenset((sa, base + d)), ia, t_in, partner=partner)
                    if 4 * i + out != base + d:
                        raise SourcesNotInBoundaryOfS(f"path from {source} did not reach slot {d} at {w}")
                    add(d, q, n, bits)
            result.cosets[w] = histogram

        if plus:
            counts[sa].update(plus)
        for s, c in counts.items():
            result.counts.setdefault(self._slot_point(s), Counter()).update(c)
        return result


_X_POWERS: List[Q8Number] = [ONE]


def x_power(n: int) -> Q8Number:
    while len(_X_POWERS) <= n:
        _X_POWERS.append(_X_POWERS[-1] * X_CRIT)
    return _X_POWERS[n]


def polynomial_in_x(coefficients: Dict[int, int]) -> Q8Number:
    total = ZERO
    for n, c in coefficients.items():
        if c:
            total = total + x_power(n) * c
    return total


def evaluate_counts(counter: Counter, branch_mask: int) -> Q8Number:
    """Sum of count * zeta^k * x^n * (-1)^(branched crossing parity)."""
    by_k: Dict[int, Dict[int, int]] = defaultdict(lambda: defaultdict(int))
    for (k, n, bits), c in counter.items():
        sign = -1 if bin(bits & branch_mask).count("1") & 1 else 1
        by_k[k][n] += sign * c
    total = ZERO
    for k, poly in by_k.items():
        total = total + Q8Number.zeta_power(k) * polynomial_in_x(poly)
    return total


def evaluate_histogram(histogram: Counter, branch_mask: int, offset: int = 0, flip_bits: int = 0) -> Q8Number:
    """Sum of x^(n + offset) * (-1)^(parity of (bits ^ flip_bits) on branched holes)."""
    poly: Dict[int, int] = defaultdict(int)
    for (n, bits), c in histogram.items():
        sign = -1 if bin((bits ^ flip_bits) & branch_mask).count("1") & 1 else 1
        poly[n + offset] += sign * c
    return polynomial_in_x(poly)


def configuration_space(domain: DiscreteDomain, strategy: Optional[str] = None) -> ConfigurationSpace:
    strategy = strategy or settings.CUT_STRATEGY
    key = ("space", strategy)
    if key not in domain._cache:
        domain._cache[key] = ConfigurationSpace(domain, strategy)
    return domain._cache[key]


def _reduce_sources(sources: Sequence[Point]) -> List[HalfEdge]:
    if any(not isinstance(p, HalfEdge) for p in sources):
        raise InfeasibleSources("sources must be boundary half-edges")
    parity = Counter(sources)
    return sorted(p for p, c in parity.items() if c % 2)


def enumerate_configs(domain: DiscreteDomain, sources: Sequence[Point] = ()) -> Iterator[Configuration]:
    """Stream the coset of configurations whose boundary is the reduced source set."""
    reduced = _reduce_sources(sources)
    for h in reduced:
        if h not in domain.half_edge_set:
            raise InfeasibleSources(f"{h} is not a boundary half-edge of the domain")
    space = configuration_space(domain)
    whiskers = frozenset(reduced)
    for mask, _ in space.coset([h.vertex for h in reduced]):
        yield Configuration(space.mask_to_edges(mask), whiskers)


def raw_filter(domain: DiscreteDomain, sources: Optional[Sequence[Point]] = None) -> List[Configuration]:
    """Exhaustive subset filter; sources=None admits any set of boundary half-edges."""
    elements: List[Point] = list(domain.edges) + list(domain.half_edges)
    if len(elements) > settings.RAW_FILTER_MAX_EDGES:
        raise ToolkitInputError(
            f"raw filter limited to {settings.RAW_FILTER_MAX_EDGES} elements, domain has {len(elements)}"
        )
    wanted = None if sources is None else frozenset(_reduce_sources(sources))
    found = []
    for r in range(len(elements) + 1):
        for subset in itertools.combinations(elements, r):
            edges = frozenset(p for p in subset if isinstance(p, Edge))
            halves = frozenset(p for p in subset if isinstance(p, HalfEdge))
            if wanted is not None and halves != wanted:
                continue
            config = Configuration(edges, halves)
            if all(config.degree(v) % 2 == 0 for v in domain.vertices):
                found.append(config)
    return found


def _check_marked(domain: DiscreteDomain, marked: Sequence[HalfEdge]) -> None:
    if len(set(marked)) != len(marked):
        raise ToolkitInputError("marked half-edges must be distinct")
    if len(marked) % 2:
        raise InfeasibleSources("an even number of marked half-edges is required")
    if not domain.outer_order(marked):
        raise MarkedPointsNotOuterBoundary(
            "marked half-edges must lie on the outer boundary in counterclockwise order",
            {"marked": [[list(h.vertex), h.name] for h in marked]},
        )


def minus_arc_edges(domain: DiscreteDomain, marked: Sequence[HalfEdge]) -> List[Edge]:
    """Boundary edges carrying "-" spins: arcs from marked[0] to marked[1], marked[2] to marked[3], ..."""
    edges: List[Edge] = []
    for s in range(0, len(marked), 2):
        edges.extend(domain.arc_edges(marked[s], marked[s + 1]))
    return edges


def _convolve(left: Dict[int, int], right: Dict[int, int]) -> Dict[int, int]:
    out: Dict[int, int] = defaultdict(int)
    for i, a in left.items():
        for j, b in right.items():
            out[i + j] += a * b
    return out


def _free_partition(domain: DiscreteDomain) -> Q8Number:
    # exponents below count half-edges; two whiskers weigh one x
    space = configuration_space(domain)
    whiskers_at: Dict[Vertex, int] = Counter(h.vertex for h in domain.half_edges)
    even_poly: Dict[Vertex, Dict[int, int]] = {}
    odd_poly: Dict[Vertex, Dict[int, int]] = {}
    for v, h in whiskers_at.items():
        even_poly[v] = {r: math.comb(h, r) for r in range(0, h + 1, 2)}
        odd_poly[v] = {r: math.comb(h, r) for r in range(1, h + 1, 2)}
    boundary = sorted(whiskers_at)
    halves: Dict[int, int] = defaultdict(int)
    for r in range(0, len(boundary) + 1, 2):
        for chosen in itertools.combinations(boundary, r):
            weight: Dict[int, int] = {0: 1}
            chosen_set = set(chosen)
            for v in boundary:
                weight = _convolve(weight, odd_poly[v] if v in chosen_set else even_poly[v])
            histogram = Counter(2 * mask.bit_count() for mask, _ in space.coset(list(chosen)))
            for e, c in _convolve(weight, histogram).items():
                halves[e] += c
    return polynomial_in_x({e // 2: c for e, c in halves.items()})


def spin_sum(domain: DiscreteDomain, bc: BoundaryCondition,
             components: Sequence[Component] = ()) -> Q8Number:
    """Z * E[prod of component spins] under plus or alternating boundary conditions."""
    if bc.kind == "free":
        if components:
            raise ToolkitInputError("spin correlations need plus or alternating boundary conditions")
        return _free_partition(domain)
    space = configuration_space(domain)
    marked = bc.marked if bc.kind == "alternating" else ()
    if marked:
        _check_marked(domain, marked)
    spin_mask = 0
    for component in components:
        spin_mask ^= _component_edge_mask(domain, space, component)
    minus_mask = space.edges_to_mask(minus_arc_edges(domain, marked)) if marked else 0
    base_sign = bin(minus_mask & spin_mask).count("1") & 1
    poly: Dict[int, int] = defaultdict(int)
    for mask, _ in space.coset([h.vertex for h in marked]):
        sign = -1 if (bin(mask & spin_mask).count("1") + base_sign) & 1 else 1
        poly[mask.bit_count() + len(marked) // 2] += sign
    return polynomial_in_x(poly)


def _component_edge_mask(domain: DiscreteDomain, space: ConfigurationSpace, component: Component) -> int:
    if isinstance(component, int):
        if not 0 <= component < len(domain.holes):
            raise ComponentNotFound(f"no hole with index {component}", {"component": component})
        start = min(domain.holes[component])
    else:
        start = (int(component[0]), int(component[1]))
        if start not in domain.faces:
            raise ComponentNotFound(f"{start} is not a face of the domain", {"component": list(start)})
    cut = domain.dual_cut(start, space.strategy)
    mask = 0
    for k, e in enumerate(domain.edges):
        d = e.direction
        if ((e.v1, d) in cut) != ((e.v2, (d + 2) % 4) in cut):
            mask |= 1 << k
    return mask


def partition_fn(domain: DiscreteDomain, bc: BoundaryCondition) -> Q8Number:
    return spin_sum(domain, bc, ())


def spin_expectation(domain: DiscreteDomain, bc: BoundaryCondition,
                     components: Sequence[Component]) -> Q8Number:
    if bc.kind == "free":
        raise ToolkitInputError("spin correlations need plus or alternating boundary conditions")
    weighted = spin_sum(domain, bc, components)
    if not components:
        return ONE
    return weighted * partition_fn(domain, bc).real_inverse()
