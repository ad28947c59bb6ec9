"""
Discrete Riemann boundary value problem on a double cover.

Unknowns are the real projections X(c) = Re(conj(eta_c) F) at the four
corners of every vertex, taken on sheet +1. Both edge values around a
corner share its projection, so s-holomorphicity holds by construction;
rows tie the two halves of each edge together, impose F(b) || eta_b on
boundary half-edges and normalize F(a) = i eta_a.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from backend.config.settings import settings
from backend.services.lattice_service import (
    Cell,
    Corner,
    CoverPoint,
    DiscreteDomain,
    DoubleCover,
    Edge,
    HalfEdge,
    Vertex,
    corner_angle,
    eta_of,
    step,
)
from backend.services.observable_service import (
    IdentityReport,
    SpinorField,
    Value,
    _conj,
    observable_field,
)
from backend.services.qcyc import I_UNIT, SQRT2, ZERO, Q8Number
from backend.utils.errors import ClosureViolation, SingularSystem, ToolkitInputError, ZeroSolution

logger = logging.getLogger(__name__)

# (Re F, Im F) from the projections at the corners before and after slot d
_RECON = []
for _d in range(4):
    _t1, _t2 = corner_angle((_d - 1) % 4), corner_angle(_d)
    _RECON.append(np.linalg.inv(np.array([[math.cos(_t1), math.sin(_t1)], [math.cos(_t2), math.sin(_t2)]])))


@dataclass
class CornerSystem:
    cover: DoubleCover
    source: CoverPoint
    matrix: object  # scipy.sparse csr matrix, all rows
    rhs: np.ndarray
    solve_rows: int  # leading rows forming the square system
    homogeneous: bool = False

    @property
    def unknowns(self) -> int:
        return self.matrix.shape[1]


@dataclass
class HomogeneousResult:
    norm: float
    smallest_singular_value: float


@dataclass
class HField:
    domain: DiscreteDomain
    source: HalfEdge
    vertex_values: Dict[Vertex, Value]
    cell_values: Dict[Cell, Value]
    constants: Dict[int, Value]  # boundary component (-1 outer) -> H on its cells
    closure_defect: float
    exact: bool
    boundary_values: Dict[HalfEdge, Value]  # F(b) seen from b.vertex

    def negated(self) -> "HField":
        return HField(
            self.domain, self.source,
            {v: -x for v, x in self.vertex_values.items()},
            {c: -x for c, x in self.cell_values.items()},
            {j: -x for j, x in self.constants.items()},
            self.closure_defect, self.exact, self.boundary_values,
        )


class _Rows:
    """Sparse row accumulator."""

    def __init__(self):
        self.rows: List[int] = []
        self.cols: List[int] = []
        self.data: List[float] = []
        self.rhs: List[float] = []

    def add(self, coefficients: Dict[int, float], value: float = 0.0) -> None:
        r = len(self.rhs)
        for c, x in coefficients.items():
            if x != 0.0:
                self.rows.append(r)
                self.cols.append(c)
                self.data.append(x)
        self.rhs.append(value)

    def __len__(self) -> int:
        return len(self.rhs)


def _slot_terms(index: int, d: int, sign: float) -> Tuple[Dict[int, float], Dict[int, float]]:
    """Linear forms for Re and Im of sign * F seen from vertex index through slot d."""
    inv = _RECON[d]
    c1, c2 = 4 * index + (d - 1) % 4, 4 * index + d
    re = {c1: sign * inv[0, 0], c2: sign * inv[0, 1]}
    im = {c1: sign * inv[1, 0], c2: sign * inv[1, 1]}
    return re, im


def _combine(*forms: Tuple[float, Dict[int, float]]) -> Dict[int, float]:
    out: Dict[int, float] = {}
    for factor, form in forms:
        for c, x in form.items():
            out[c] = out.get(c, 0.0) + factor * x
    return out


def build_corner_system(cover: DoubleCover, source: CoverPoint, homogeneous: bool = False) -> CornerSystem:
    domain = cover.domain
    if not isinstance(source.point, HalfEdge) or source.point not in domain.half_edge_set:
        raise ToolkitInputError("the source must be a boundary half-edge")
    index = {v: i for i, v in enumerate(domain.vertices)}
    rows = _Rows()

    for e in domain.edges:
        d = e.direction
        s1 = -1.0 if cover.flip(e.v1, d) else 1.0
        s2 = -1.0 if cover.flip(e.v2, (d + 2) % 4) else 1.0
        re1, im1 = _slot_terms(index[e.v1], d, s1)
        re2, im2 = _slot_terms(index[e.v2], (d + 2) % 4, s2)
        rows.add(_combine((1.0, re1), (-1.0, re2)))
        rows.add(_combine((1.0, im1), (-1.0, im2)))

    a = source.point
    for h in domain.half_edges:
        if h == a and not homogeneous:
            continue
        phi = (eta_of(h)).to_complex()
        re, im = _slot_terms(index[h.vertex], h.direction, 1.0)
        # Im(conj(eta) F) = cos(phi) Im F - sin(phi) Re F
        rows.add(_combine((phi.real, im), (-phi.imag, re)))

    solve_rows = len(rows)
    if not homogeneous:
        phi = eta_of(a).to_complex()
        sign = float(source.sheet) * (-1.0 if cover.flip(a.vertex, a.direction) else 1.0)
        re, im = _slot_terms(index[a.vertex], a.direction, 1.0)
        rows.add(_combine((phi.real, im), (-phi.imag, re)), sign)
        solve_rows = len(rows)
        # Re(conj(eta_a) F(a)) = 0 holds automatically; kept for the residual
        rows.add(_combine((phi.real, re), (phi.imag, im)))

    n = 4 * len(domain.vertices)
    matrix = coo_matrix((rows.data, (rows.rows, rows.cols)), shape=(len(rows), n)).tocsr()
    logger.debug(f"Corner system: {len(rows)} rows, {n} unknowns, {matrix.nnz} nonzeros")
    return CornerSystem(cover, source, matrix, np.array(rows.rhs), solve_rows, homogeneous)


def _field_from_corners(cover: DoubleCover, source: CoverPoint, x: np.ndarray) -> Dict:
    domain = cover.domain
    index = {v: i for i, v in enumerate(domain.vertices)}

    def seen(v: Vertex, d: int) -> complex:
        inv = _RECON[d]
        i = index[v]
        x1, x2 = x[4 * i + (d - 1) % 4], x[4 * i + d]
        value = complex(inv[0, 0] * x1 + inv[0, 1] * x2, inv[1, 0] * x1 + inv[1, 1] * x2)
        return -value if cover.flip(v, d) else value

    values = {}
    for e in domain.edges:
        values[e] = seen(e.v1, e.direction)
    for h in domain.half_edges:
        values[h] = seen(h.vertex, h.direction)
    return values


def solve_bvp(cover: DoubleCover, a: CoverPoint) -> SpinorField:
    """
    Solve the boundary value problem for F(a, .) normalized by F(a) = i eta_a.

    Args:
        cover: double cover of the domain
        a: boundary half-edge of the cover

    Returns:
        float SpinorField with the relative residual recorded
    """
    system = build_corner_system(cover, a)
    square = system.matrix[: system.solve_rows]
    b = system.rhs[: system.solve_rows]
    try:
        if system.unknowns < settings.DENSE_FALLBACK_UNKNOWNS:
            x = scipy.linalg.solve(square.toarray(), b)
        else:
            x = spsolve(square.tocsc(), b)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        logger.error(f"Corner system is singular: {str(e)}")
        raise SingularSystem(f"corner system is singular: {str(e)}")

    residual = float(np.linalg.norm(system.matrix @ x - system.rhs) / max(np.linalg.norm(system.rhs), 1e-300))
    if not np.all(np.isfinite(x)) or residual > settings.SOLVER_RESIDUAL_TOL:
        raise SingularSystem(f"relative residual {residual:.3e} exceeds {settings.SOLVER_RESIDUAL_TOL}",
                             {"residual": residual})
    values = _field_from_corners(cover, a, x)
    if max(abs(v) for v in values.values()) < settings.SOLVER_ZERO_TOL:
        raise ZeroSolution("solver returned the zero field")
    logger.info(f"Solved corner system with {system.unknowns} unknowns, residual {residual:.2e}")
    return SpinorField(cover, a, values, exact=False, residual=residual)


def solve_homogeneous(cover: DoubleCover, a: CoverPoint) -> HomogeneousResult:
    """Boundary condition imposed at a as well and no normalization; only F = 0 solves it."""
    system = build_corner_system(cover, a, homogeneous=True)
    dense = system.matrix.toarray()
    x, *_ = scipy.linalg.lstsq(dense, np.zeros(dense.shape[0]))
    singular = scipy.linalg.svdvals(dense)
    return HomogeneousResult(float(np.linalg.norm(x)), float(singular.min()))


def normalized(field: SpinorField) -> Dict:
    """Complex values of an exact field divided so that F(a) = i eta_a."""
    a = field.source
    scale = (_conj(I_UNIT * eta_of(a.point)) * field.value(a)).to_complex().real
    return {p: v.to_complex() / scale for p, v in field.values.items()}


def field_difference(solved: SpinorField, exact: SpinorField) -> float:
    reference = normalized(exact)
    return max(abs(solved.values[p] - reference[p]) for p in reference)


def _projection_sq(value: Value, corner: Corner, exact: bool) -> Value:
    e2 = eta_of(corner)
    if exact:
        return (e2.conj() * value * value + value * value.conj() * 2 + e2 * value.conj() * value.conj()) * Fraction(1, 4)
    theta = corner_angle(corner.index)
    x = value.real * math.cos(theta) + value.imag * math.sin(theta)
    return x * x


def build_h(field: SpinorField) -> HField:
    """Integrate H over the vertex/cell incidence graph; ClosureViolation on inconsistent loops."""
    domain = field.cover.domain
    exact = field.exact
    scale = SQRT2 * Fraction(domain.delta) if exact else math.sqrt(2.0) * float(domain.delta)
    graph = nx.Graph()
    for v in domain.vertices:
        for k in range(4):
            corner = Corner(v, k)
            weight = scale * _projection_sq(field.local_value(v, k), corner, exact)
            graph.add_edge(("v", v), ("f", corner.cell), weight=weight, corner=corner)

    a = field.source.point
    root = ("f", Corner(a.vertex, a.direction).cell)
    zero = ZERO if exact else 0.0
    values = {root: zero}
    for parent, child in nx.bfs_edges(graph, root):
        w = graph[parent][child]["weight"]
        values[child] = values[parent] + w if child[0] == "v" else values[parent] - w

    worst, worst_corner, max_weight = 0.0, None, 0.0
    for n1, n2, data in graph.edges(data=True):
        vnode, fnode = (n1, n2) if n1[0] == "v" else (n2, n1)
        defect = values[vnode] - values[fnode] - data["weight"]
        if exact:
            size = abs(defect.to_complex())
            if defect != 0:
                size = max(size, 5e-324)
            max_weight = max(max_weight, abs(data["weight"].to_complex()))
        else:
            size = abs(defect)
            max_weight = max(max_weight, abs(data["weight"]))
        if size > worst:
            worst, worst_corner = size, data["corner"]
    tol = 0.0 if exact else settings.PROPERTY_TOL * max(1.0, max_weight)
    if worst > tol:
        raise ClosureViolation(
            f"H fails to close, defect {worst:.3e}",
            {"corner": {"vertex": list(worst_corner.vertex), "index": worst_corner.index}, "defect": worst},
        )

    vertex_values = {n[1]: x for n, x in values.items() if n[0] == "v"}
    cell_values = {n[1]: x for n, x in values.items() if n[0] == "f"}
    constants = {}
    for cell, x in cell_values.items():
        if cell not in domain.faces:
            constants.setdefault(domain.component_of_cell(cell), x)
    boundary_values = {b: field.local_value(b.vertex, b.direction) for b in domain.half_edges}
    return HField(domain, a, vertex_values, cell_values, constants, worst, exact, boundary_values)


def _sign(x: Value, exact: bool, tol: float) -> int:
    if exact:
        return x.sign()
    if x > tol:
        return 1
    if x < -tol:
        return -1
    return 0


def check_h_properties(h: HField, tol: Optional[float] = None) -> IdentityReport:
    """Superharmonic faces, subharmonic vertices, boundary monotonicity and constancy."""
    tol = settings.PROPERTY_TOL if tol is None else tol
    domain = h.domain
    report = IdentityReport("H properties")
    report.check("closure").record(h.closure_defect <= (0.0 if h.exact else tol), {}, f"defect {h.closure_defect}")

    faces = report.check("face_superharmonic")
    for x, y in sorted(domain.faces):
        neighbours = [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
        if not all(n in domain.faces for n in neighbours):
            continue
        lap = sum((h.cell_values[n] - h.cell_values[(x, y)] for n in neighbours), ZERO if h.exact else 0.0)
        faces.record(_sign(lap, h.exact, tol) <= 0, {"face": [x, y]}, f"laplacian {lap}")

    vertices = report.check("vertex_subharmonic")
    for v in domain.vertices:
        if not all(isinstance(domain.slot(v, d), Edge) for d in range(4)):
            continue
        lap = sum((h.vertex_values[step(v, d)] - h.vertex_values[v] for d in range(4)), ZERO if h.exact else 0.0)
        vertices.record(_sign(lap, h.exact, tol) >= 0, {"vertex": list(v)}, f"laplacian {lap}")

    # H(v) - H(v + delta u_b), extending H across b by the increment of F(b)
    monotone = report.check("boundary_monotone")
    for b, value in h.boundary_values.items():
        if b == h.source:
            continue
        u = Q8Number.zeta_power(2 * b.direction)
        if h.exact:
            drop = -(u * value * value).im * Fraction(domain.delta)
        else:
            drop = -float(domain.delta) * (u.to_complex() * value * value).imag
        monotone.record(_sign(drop, h.exact, tol) >= 0, {"half_edge": [list(b.vertex), b.name]}, f"drop {drop}")

    constant = report.check("boundary_constant")
    for cell, x in h.cell_values.items():
        if cell in domain.faces:
            continue
        component = domain.component_of_cell(cell)
        diff = x - h.constants[component]
        constant.record(_sign(diff, h.exact, tol) == 0, {"cell": list(cell), "component": component}, f"offset {diff}")
    return report


def boundary_ratio(domain: DiscreteDomain, cover: DoubleCover, trivial: DoubleCover,
                   a: HalfEdge, b: HalfEdge) -> float:
    """[F(a,b)/F(a,a)] * [F0(a,a)/F0(a,b)] from two solver runs."""
    if a == b or not (domain.is_outer(a) and domain.is_outer(b)):
        raise ToolkitInputError("a and b must be distinct outer boundary half-edges")
    lift = CoverPoint(a, 1)
    branched = solve_bvp(cover, lift)
    plain = solve_bvp(trivial, lift)
    ratio = (branched.value(cover.arc_lift(lift, b)) / branched.value(lift)) * (
        plain.value(lift) / plain.value(trivial.arc_lift(lift, b))
    )
    return float(ratio.real)


def boundary_ratio_exact(domain: DiscreteDomain, cover: DoubleCover, trivial: DoubleCover,
                         a: HalfEdge, b: HalfEdge) -> Q8Number:
    """The same double ratio from enumeration fields, in Q(sqrt 2)."""
    if a == b or not (domain.is_outer(a) and domain.is_outer(b)):
        raise ToolkitInputError("a and b must be distinct outer boundary half-edges")
    lift = CoverPoint(a, 1)
    branched = observable_field(cover, lift)
    plain = observable_field(trivial, lift)
    fb = branched.value(cover.arc_lift(lift, b))
    f0b = plain.value(trivial.arc_lift(lift, b))
    unit = (I_UNIT * eta_of(a)).conj()
    p_branched = unit * branched.value(lift)
    p_plain = unit * plain.value(lift)
    cross = fb * f0b.conj()
    return cross * (f0b * f0b.conj()).real_inverse() * p_plain * p_branched.real_inverse()
