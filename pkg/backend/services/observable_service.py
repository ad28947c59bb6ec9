"""
Spinor observables on double covers, computed by exact enumeration, and the
identity checks they satisfy.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

from backend.services.enumeration_service import (
    BoundaryCondition,
    Configuration,
    SourceCounts,
    _Tracer,
    configuration_space,
    decompose,
    evaluate_counts,
    evaluate_histogram,
    partition_fn,
    spin_sum,
    x_power,
)
from backend.services.lattice_service import (
    Corner,
    CoverPoint,
    DiscreteDomain,
    DoubleCover,
    Edge,
    HalfEdge,
    Point,
    build_cover,
    describe_point,
    eta_of,
)
from backend.services.qcyc import I_UNIT, ONE, ZERO, Q8Number
from backend.utils.errors import (
    InfeasibleSources,
    MarkedPointsNotOuterBoundary,
    NotAntisymmetric,
    SourcesNotInBoundaryOfS,
)

logger = logging.getLogger(__name__)

Value = Union[Q8Number, complex]


def _conj(x: Value) -> Value:
    return x.conj() if isinstance(x, Q8Number) else x.conjugate()


@dataclass
class SpinorField:
    """Values on the canonical sheet of every edge midpoint and half-edge tip."""
    cover: DoubleCover
    source: CoverPoint
    values: Dict[Point, Value]
    exact: bool = True
    residual: Optional[float] = None

    def value(self, z: CoverPoint) -> Value:
        v = self.values[z.point]
        return v if z.sheet == 1 else -v

    def local_value(self, vertex, direction: int) -> Value:
        """Value of the slot seen from a vertex lifted to sheet +1."""
        p = self.cover.domain.slot(vertex, direction)
        v = self.values[p]
        return -v if self.cover.flip(vertex, direction) else v

    def scaled(self, factor) -> SpinorField:
        return SpinorField(self.cover, self.source, {p: v * factor for p, v in self.values.items()}, self.exact)

    def perturbed(self, point: Point, delta: Value) -> SpinorField:
        values = dict(self.values)
        values[point] = values[point] + delta
        return SpinorField(self.cover, self.source, values, self.exact)


@dataclass(frozen=True)
class ArcData:
    """Artificial arcs joining marked points in pairs outside the domain."""
    source: CoverPoint
    marked: Tuple[HalfEdge, ...]
    lifts: Tuple[int, ...]
    windings: Tuple[int, ...]  # quarter-turns from leaving the first tip to entering the second
    lift_bits: Tuple[int, ...]
    etas: Tuple[Q8Number, ...]

    @property
    def arc_map(self) -> Dict[HalfEdge, Tuple[HalfEdge, int]]:
        arcs = {}
        for s, turn in enumerate(self.windings):
            first, second = self.marked[2 * s], self.marked[2 * s + 1]
            arcs[first] = (second, turn)
            arcs[second] = (first, -turn)
        return arcs

    def partner(self, k: int) -> int:
        """Arc partner of marked index k (1-based over a_1..a_2n)."""
        return k + 1 if k % 2 else k - 1

    def lift(self, k: int) -> CoverPoint:
        if k == 0:
            return self.source
        return CoverPoint(self.marked[k - 1], self.lifts[k - 1])

    def eta(self, k: int) -> Q8Number:
        if k == 0:
            return eta_of(self.source.point)
        return self.etas[k - 1]


@dataclass
class GMatrix:
    points: Tuple[CoverPoint, ...]
    entries: List[List[Value]]

    def is_real(self) -> bool:
        return all(
            (x.is_real() if isinstance(x, Q8Number) else abs(x.imag) < 1e-12)
            for row in self.entries for x in row
        )

    def is_antisymmetric(self) -> bool:
        n = len(self.entries)
        return all(self.entries[j][k] == -self.entries[k][j] for j in range(n) for k in range(n))

    def minor(self, k: int) -> List[List[Value]]:
        return [[x for c, x in enumerate(row) if c != k] for r, row in enumerate(self.entries) if r != k]


def build_arcs(cover: DoubleCover, a0: CoverPoint, marked: Sequence[HalfEdge]) -> ArcData:
    domain = cover.domain
    marked = tuple(marked)
    if len(marked) % 2:
        raise InfeasibleSources(f"an even number of extra marked points is required, got {len(marked)}")
    points = (a0.point,) + marked
    if len(set(points)) != len(points) or not domain.outer_order(points):
        raise MarkedPointsNotOuterBoundary(
            "marked points must be distinct outer half-edges in counterclockwise order",
            {"marked": [describe_point(p) for p in points]},
        )
    lifts = tuple(cover.arc_lift(a0, h).sheet for h in marked)
    windings, lift_bits, etas = [], [], []
    for s in range(0, len(marked), 2):
        first, second = marked[s], marked[s + 1]
        turn = 2 + domain.arc_winding(first, second)
        windings.append(turn)
        lift_bits.append(int(lifts[s] != lifts[s + 1]))
        eta_first = eta_of(first)
        etas.extend([eta_first, I_UNIT * eta_first * Q8Number.zeta_power(-turn)])
    return ArcData(a0, marked, lifts, tuple(windings), tuple(lift_bits), tuple(etas))


def _source_counts(domain: DiscreteDomain, source: HalfEdge, rule: str = "NE") -> SourceCounts:
    if source not in domain.half_edge_set:
        raise InfeasibleSources(f"{source} is not a boundary half-edge of the domain")
    key = ("counts", source, rule)
    if key not in domain._cache:
        logger.debug(f"Enumerating observable counts from {source} ({rule})")
        domain._cache[key] = configuration_space(domain).source_counts(source, rule=rule)
    return domain._cache[key]


def observable_field(cover: DoubleCover, source: CoverPoint, eta: Optional[Q8Number] = None,
                     rule: str = "NE") -> SpinorField:
    """F(a, .) at every point of the cover, exactly."""
    domain = cover.domain
    counts = _source_counts(domain, source.point, rule)
    prefactor = I_UNIT * (eta if eta is not None else eta_of(source.point)) * source.sheet
    empty: Counter = Counter()
    values = {
        p: prefactor * evaluate_counts(counts.counts.get(p, empty), cover.branch_mask)
        for p in domain.points
    }
    return SpinorField(cover, source, values, exact=True)


def observable(cover: DoubleCover, a: CoverPoint, z: CoverPoint, rule: str = "NE") -> Q8Number:
    domain = cover.domain
    if not isinstance(a.point, HalfEdge) or a.point not in domain.half_edge_set:
        raise InfeasibleSources("the source must be a boundary half-edge")
    key = ("counts", a.point, rule)
    if key in domain._cache:
        counter = domain._cache[key].counts.get(z.point, Counter())
    else:
        if isinstance(z.point, Edge):
            vertices = [z.point.v1, z.point.v2]
        else:
            vertices = [z.point.vertex]
        counts = configuration_space(domain).source_counts(a.point, vertices=vertices, rule=rule)
        counter = counts.counts.get(z.point, Counter())
    value = I_UNIT * eta_of(a.point) * a.sheet * evaluate_counts(counter, cover.branch_mask)
    return value if z.sheet == 1 else -value


def configurations_to(domain: DiscreteDomain, a: HalfEdge, z: Point) -> Iterator[Configuration]:
    """Conf_{a,z}: Conf_+ when z = a, otherwise configurations joining a to z."""
    space = configuration_space(domain)
    if z == a:
        for mask, _ in space.coset([]):
            yield Configuration(space.mask_to_edges(mask))
        return
    if isinstance(z, HalfEdge):
        for mask, _ in space.coset([a.vertex, z.vertex]):
            yield Configuration(space.mask_to_edges(mask), frozenset((a, z)))
        return
    d = z.direction
    for w, half in ((z.v1, d), (z.v2, (d + 2) % 4)):
        for mask, _ in space.coset([a.vertex, w]):
            edges = space.mask_to_edges(mask)
            if z in edges:
                continue
            yield Configuration(edges, frozenset((a,)), tail=(w, half))


def complex_phase(cover: DoubleCover, z: CoverPoint, configuration: Configuration,
                  source: CoverPoint, rule: str = "NE") -> Q8Number:
    """zeta^-wind * (-1)^(nontrivial loops) * s(z, path), from an explicit decomposition."""
    parts = decompose(configuration, source.point, z.point, cover, rule, source.sheet)
    phase = Q8Number.zeta_power(-parts.winding)
    if sum(parts.loop_bits) % 2:
        phase = -phase
    if parts.path_sheet != z.sheet:
        phase = -phase
    return phase


def observable_literal(cover: DoubleCover, a: CoverPoint, z: CoverPoint, rule: str = "NE") -> Q8Number:
    """Observable summed configuration by configuration through complex_phase."""
    total = ZERO
    for config in configurations_to(cover.domain, a.point, z.point):
        total = total + complex_phase(cover, z, config, a, rule) * x_power(config.size)
    return I_UNIT * eta_of(a.point) * total


def _trace_multi(config: Configuration, a0: HalfEdge, z: Point,
                 arc_map: Dict[HalfEdge, Tuple[HalfEdge, int]], rule: str) -> Tuple[int, int]:
    """Quarter-turns of the path to z and the number of loops with zero winding mod 8."""
    tracer = _Tracer(config, rule, arc_map)
    winding = 0
    if z != a0:
        tracer.used_whiskers.add(a0)
        winding, end = tracer.run(a0.vertex, (a0.direction + 2) % 4, [])
        if isinstance(z, Edge):
            reached = end[0] == "tail" and Edge.from_slot(*end[1]) == z
        else:
            reached = end[1] == z and end[0] in ("whisker", "arc")
        if not reached:
            raise SourcesNotInBoundaryOfS(f"path from {a0} ends at {end}, not at {z}")
    zero_loops = 0
    for h in sorted(config.half_edges):
        if h in tracer.used_whiskers:
            continue
        if h not in arc_map:
            raise SourcesNotInBoundaryOfS(f"half-edge {h} is neither on the path nor on an arc")
        tracer.used_whiskers.add(h)
        q, end = tracer.run(h.vertex, (h.direction + 2) % 4, [], stop_whisker=h)
        if end[0] != "closed":
            raise SourcesNotInBoundaryOfS(f"loop through {h} does not close")
        if q % 8 == 0:
            zero_loops += 1
    return winding, zero_loops


def _multi_counts(domain: DiscreteDomain, arcs: ArcData, rule: str) -> Dict[Point, Counter]:
    a0 = arcs.source.point
    key = ("multi", a0, arcs.marked, arcs.windings, rule)
    if key in domain._cache:
        return domain._cache[key]
    space = configuration_space(domain)
    arc_map = arcs.arc_map
    marked = set(arcs.marked)
    base = (a0,) + arcs.marked
    counts: Dict[Point, Counter] = defaultdict(Counter)

    def accumulate(point: Point, whiskers: Tuple[HalfEdge, ...], tail=None) -> None:
        odd = [h.vertex for h in whiskers] + ([tail[0]] if tail else [])
        whisker_bits = 0
        for h in whiskers:
            whisker_bits ^= space.half_bit(h.vertex, h.direction)
        if tail:
            whisker_bits ^= space.half_bit(*tail)
        extra = (len(whiskers) + (1 if tail else 0)) // 2
        for mask, bits in space.coset(odd):
            edges = space.mask_to_edges(mask)
            if tail and point in edges:
                continue
            config = Configuration(edges, frozenset(whiskers), tail)
            q, zero_loops = _trace_multi(config, a0, point, arc_map, rule)
            sign = -1 if zero_loops % 2 else 1
            counts[point][((-q) % 8, mask.bit_count() + extra, bits ^ whisker_bits)] += sign

    for p in domain.points:
        if p == a0:
            accumulate(p, arcs.marked)
        elif p in marked:
            accumulate(p, tuple(h for h in base if h != p))
        elif isinstance(p, HalfEdge):
            accumulate(p, base + (p,))
        else:
            d = p.direction
            for tail in ((p.v1, d), (p.v2, (d + 2) % 4)):
                accumulate(p, base, tail)
    domain._cache[key] = counts
    return counts


def multi_field(cover: DoubleCover, arcs: ArcData, rule: str = "NE") -> SpinorField:
    domain = cover.domain
    counts = _multi_counts(domain, arcs, rule)
    sign = -1 if sum(arcs.lift_bits) % 2 else 1
    prefactor = I_UNIT * eta_of(arcs.source.point) * (arcs.source.sheet * sign)
    empty: Counter = Counter()
    values = {p: prefactor * evaluate_counts(counts.get(p, empty), cover.branch_mask) for p in domain.points}
    return SpinorField(cover, arcs.source, values, exact=True)


def observable_multi(cover: DoubleCover, a0: CoverPoint, marked: Sequence[HalfEdge], z: CoverPoint,
                     arcs: Optional[ArcData] = None, rule: str = "NE") -> Q8Number:
    if not marked:
        return observable(cover, a0, z, rule)
    arcs = arcs or build_arcs(cover, a0, marked)
    return multi_field(cover, arcs, rule).value(z)


def pfaffian(matrix: Sequence[Sequence[Value]], tol: float = 1e-12) -> Value:
    """Pfaffian by first-row expansion; exact for Q8Number entries."""
    rows = [list(row) for row in matrix]
    n = len(rows)
    if any(len(row) != n for row in rows):
        raise NotAntisymmetric("matrix is not square")
    exact = any(isinstance(x, Q8Number) for row in rows for x in row)
    scale = 1.0 if exact else max([1.0] + [abs(x) for row in rows for x in row])
    for j in range(n):
        for k in range(j, n):
            s = rows[j][k] + rows[k][j]
            bad = s != 0 if exact else abs(s) > tol * scale
            if bad:
                raise NotAntisymmetric(f"entries ({j},{k}) and ({k},{j}) are not opposite", {"row": j, "col": k})
    zero = ZERO if exact else 0.0
    one = ONE if exact else 1.0
    return _pf(rows, zero, one)


def _pf(rows: List[List[Value]], zero: Value, one: Value) -> Value:
    n = len(rows)
    if n == 0:
        return one
    if n % 2:
        return zero
    total = zero
    for j in range(1, n):
        a = rows[0][j]
        if a == 0:
            continue
        keep = [i for i in range(1, n) if i != j]
        sub = [[rows[r][c] for c in keep] for r in keep]
        term = a * _pf(sub, zero, one)
        total = total + term if j % 2 else total - term
    return total


def g_matrix(fields: Sequence[SpinorField], lifts: Sequence[CoverPoint], etas: Sequence[Q8Number]) -> GMatrix:
    """G[j][k] = F(a_j; a_k) / (i F(a_k; a_k)), zero on the diagonal."""
    n = len(fields)
    inverses = []
    for k in range(n):
        self_value = fields[k].value(lifts[k])
        positive = (_conj(I_UNIT * etas[k]) * self_value)
        inverses.append(-_conj(etas[k]) * positive.real_inverse())
    entries = [
        [ZERO if j == k else fields[j].value(lifts[k]) * inverses[k] for k in range(n)]
        for j in range(n)
    ]
    return GMatrix(tuple(lifts), entries)


@dataclass
class IdentityCheck:
    name: str
    passed: bool = True
    checked: int = 0
    locus: Dict[str, Any] = field(default_factory=dict)
    detail: str = ""

    def record(self, ok: bool, locus: Optional[Dict[str, Any]] = None, detail: str = "") -> bool:
        self.checked += 1
        if not ok and self.passed:
            self.passed = False
            self.locus = locus or {}
            self.detail = detail
        return ok

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"pass": self.passed, "checked": self.checked}
        if not self.passed:
            out["locus"] = self.locus
            out["detail"] = self.detail
        return out


@dataclass
class IdentityReport:
    label: str
    checks: Dict[str, IdentityCheck] = field(default_factory=dict)

    def check(self, name: str) -> IdentityCheck:
        if name not in self.checks:
            self.checks[name] = IdentityCheck(name)
        return self.checks[name]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def first_failure(self) -> Optional[IdentityCheck]:
        return next((c for c in self.checks.values() if not c.passed), None)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "pass": self.passed,
            "checks": {name: c.to_dict() for name, c in self.checks.items()},
        }


def _fmt(x: Value) -> str:
    return str(x) if isinstance(x, Q8Number) else repr(x)


def check_s_holomorphic(field_: SpinorField, check: IdentityCheck, cover_label: Any = None, tol: float = 0.0) -> None:
    domain = field_.cover.domain
    for v in domain.vertices:
        for k in range(4):
            e2 = eta_of(Corner(v, k))
            first = field_.local_value(v, k)
            second = field_.local_value(v, (k + 1) % 4)
            if field_.exact:
                lhs = first + e2 * _conj(first)
                rhs = second + e2 * _conj(second)
                ok = lhs == rhs
            else:
                e2c = e2.to_complex()
                lhs = first + e2c * _conj(first)
                rhs = second + e2c * _conj(second)
                ok = abs(lhs - rhs) <= tol
            check.record(ok, {"cover": cover_label, "corner": {"vertex": list(v), "index": k}},
                         f"{_fmt(lhs)} != {_fmt(rhs)}")


def check_boundary(field_: SpinorField, check: IdentityCheck, cover_label: Any = None, tol: float = 0.0) -> None:
    source = field_.source.point
    for h in field_.cover.domain.half_edges:
        eta = eta_of(h) if h != source else I_UNIT * eta_of(h)
        if field_.exact:
            product = _conj(eta) * field_.values[h]
            ok = product.is_real()
        else:
            product = _conj(eta.to_complex()) * field_.values[h]
            ok = abs(product.imag) <= tol
        check.record(ok, {"cover": cover_label, "half_edge": describe_point(h)}, f"{_fmt(field_.values[h])} not parallel to eta")


def check_identities(domain: DiscreteDomain, covers: Sequence[DoubleCover], source: HalfEdge,
                     marked: Sequence[HalfEdge] = (), witness: Optional[HalfEdge] = None,
                     flip_eta: bool = False, compare_rules: bool = False,
                     label: str = "") -> IdentityReport:
    """
    Check every exact identity of the enumeration observables.

    Args:
        domain: the discrete domain
        covers: double covers over the domain
        source: boundary half-edge a (lifted to sheet +1)
        marked: extra outer marked points a_1..a_2n for multi-source identities
        witness: outer half-edge b after a_2n for the correlation and Pfaffian-ratio checks
        flip_eta: negate eta_a when building fields (sign detector hook)
        compare_rules: also compare fields under the alternate degree-4 resolution

    Returns:
        IdentityReport with one entry per identity
    """
    report = IdentityReport(label or f"{len(domain.faces)} faces")
    a = CoverPoint(source, 1)
    eta_a = eta_of(source)
    counts = _source_counts(domain, source)
    space = configuration_space(domain)

    for cover in covers:
        flags = [int(f) for f in cover.branch_flags]
        mask = cover.branch_mask
        field_ = observable_field(cover, a, eta=-eta_a if flip_eta else None)

        anti = report.check("antisymmetry")
        for p in domain.points:
            anti.record(field_.value(CoverPoint(p, -1)) == -field_.value(CoverPoint(p, 1)),
                        {"cover": flags, "point": describe_point(p)})
        check_s_holomorphic(field_, report.check("s_holomorphicity"), flags)
        check_boundary(field_, report.check("boundary_condition"), flags)

        plus = evaluate_histogram(counts.cosets[source.vertex], mask)
        value_aa = field_.value(a)
        report.check("spin_correlation").record(
            value_aa == I_UNIT * eta_a * plus,
            {"cover": flags, "target": describe_point(source)},
            f"F(a,a) = {value_aa}, expected {I_UNIT * eta_a * plus}",
        )
        positive = (_conj(I_UNIT * eta_a) * value_aa)
        report.check("positivity").record(
            positive.is_real() and positive.sign() > 0,
            {"cover": flags},
            f"(i eta_a)^-1 F(a,a) = {positive}",
        )
        for b in domain.half_edges:
            if b == source:
                continue
            histogram = counts.cosets[b.vertex]
            if domain.is_outer(b):
                minus_bits = space.mask_bits(space.edges_to_mask(domain.arc_edges(source, b)))
                weighted = evaluate_histogram(histogram, mask, offset=1, flip_bits=minus_bits)
                expected = -eta_a * Q8Number.zeta_power(-domain.arc_winding(source, b)) * weighted
                got = field_.value(cover.arc_lift(a, b))
                report.check("spin_correlation").record(
                    got == expected, {"cover": flags, "target": describe_point(b)},
                    f"F(a,b) = {got}, expected {expected}",
                )
            if cover.is_trivial:
                hole = domain.component_of_half_edge(b)
                z_mask = 0 if hole < 0 else 1 << hole
                z_ab = evaluate_histogram(histogram, 0, offset=1)
                counter = counts.counts.get(b, Counter())
                got = I_UNIT * eta_a * evaluate_counts(counter, z_mask)
                expected = eta_of(b) * z_ab
                report.check("boundary_modulus").record(
                    got == expected or got == -expected,
                    {"target": describe_point(b), "branching": z_mask},
                    f"F(a,b) = {got}, expected +-{expected}",
                )

        if compare_rules:
            other = observable_field(cover, a, eta=-eta_a if flip_eta else None, rule="NW")
            rules = report.check("resolution_independence")
            for p in domain.points:
                rules.record(other.values[p] == field_.values[p], {"cover": flags, "point": describe_point(p)})

        if marked:
            _check_multi(report, cover, a, tuple(marked), witness, flags)

    logger.info(f"Identity report {report.label}: {'pass' if report.passed else 'FAIL'}")
    return report


def _check_multi(report: IdentityReport, cover: DoubleCover, a: CoverPoint,
                 marked: Tuple[HalfEdge, ...], witness: Optional[HalfEdge], flags: List[int]) -> None:
    domain = cover.domain
    arcs = build_arcs(cover, a, marked)
    multi = multi_field(cover, arcs)
    n_points = len(marked) + 1
    lifts = [arcs.lift(k) for k in range(n_points)]
    etas = [arcs.eta(k) for k in range(n_points)]
    fields = [observable_field(cover, lifts[k], eta=etas[k]) for k in range(n_points)]

    g = g_matrix(fields, lifts, etas)
    report.check("g_matrix").record(
        g.is_real() and g.is_antisymmetric(), {"cover": flags}, "G is not real antisymmetric"
    )

    coefficients = []
    for k in range(n_points):
        p_k = _conj(I_UNIT * etas[k]) * fields[k].value(lifts[k])
        coefficients.append(multi.value(lifts[k]) * _conj(I_UNIT * etas[k]) * p_k.real_inverse())
    pf_terms = []
    for k in range(n_points):
        pf = pfaffian(g.minor(k))
        pf_terms.append(pf if k % 2 == 0 else -pf)

    recursion = report.check("recursion")
    expansion = report.check("pfaffian_expansion")
    for p in domain.points:
        z = CoverPoint(p, 1)
        lhs = multi.value(z)
        rhs = ZERO
        rhs_pf = ZERO
        for k in range(n_points):
            fk = fields[k].value(z)
            rhs = rhs + coefficients[k] * fk
            rhs_pf = rhs_pf + pf_terms[k] * fk
        recursion.record(lhs == rhs, {"cover": flags, "point": describe_point(p)}, f"{lhs} != {rhs}")
        expansion.record(lhs == rhs_pf, {"cover": flags, "point": describe_point(p)}, f"{lhs} != {rhs_pf}")

    reduction = report.check("arc_reduction")
    for k in range(1, n_points):
        k2 = arcs.partner(k)
        reduced = tuple(h for i, h in enumerate(marked, start=1) if i not in (k, k2))
        target = CoverPoint(marked[k2 - 1], arcs.lifts[k2 - 1])
        if reduced:
            smaller = multi_field(cover, build_arcs(cover, a, reduced)).value(target)
        else:
            smaller = observable_field(cover, a).value(target)
        factor = etas[k] * _conj(I_UNIT * etas[k2])
        if k % 2:
            factor = -factor
        lhs = multi.value(lifts[k])
        reduction.record(lhs == factor * smaller, {"cover": flags, "marked": k}, f"{lhs} != {factor * smaller}")

    branched = [j for j, flag in enumerate(cover.branch_flags) if flag]
    trivial_cover = build_cover(domain, [False] * len(domain.holes))
    trivial = multi_field(trivial_cover, build_arcs(trivial_cover, a, marked))
    for b in domain.half_edges:
        if not domain.is_outer(b) or b in marked or b == a.point:
            continue
        points = (a.point,) + marked + (b,)
        if not domain.outer_order(points):
            continue
        bc = BoundaryCondition.alternating(points)
        z_alt = partition_fn(domain, bc)
        if cover.is_trivial:
            got = multi.value(CoverPoint(b, 1))
            expected = eta_of(b) * z_alt
            report.check("boundary_modulus").record(
                got == expected or got == -expected,
                {"cover": flags, "target": describe_point(b), "marked": len(marked)},
                f"{got} != +-{expected}",
            )
        weighted = spin_sum(domain, bc, branched)
        lhs = multi.value(cover.arc_lift(a, b)) * z_alt
        rhs = trivial.value(CoverPoint(b, 1)) * weighted
        report.check("multi_spin_correlation").record(
            lhs == rhs, {"cover": flags, "target": describe_point(b)}, f"{lhs} != {rhs}"
        )

    if witness is not None:
        _check_pfaffian_ratio(report, cover, a, marked, witness, flags)


def _pfaffian_of_points(cover: DoubleCover, a: CoverPoint, marked: Tuple[HalfEdge, ...], witness: HalfEdge) -> Q8Number:
    arcs = build_arcs(cover, a, marked)
    lifts = [arcs.lift(k) for k in range(len(marked) + 1)] + [cover.arc_lift(a, witness)]
    etas = [arcs.eta(k) for k in range(len(marked) + 1)] + [eta_of(witness)]
    fields = [observable_field(cover, lifts[k], eta=etas[k]) for k in range(len(lifts))]
    return pfaffian(g_matrix(fields, lifts, etas).entries)


def _check_pfaffian_ratio(report: IdentityReport, cover: DoubleCover, a: CoverPoint,
                          marked: Tuple[HalfEdge, ...], witness: HalfEdge, flags: List[int]) -> None:
    domain = cover.domain
    trivial = build_cover(domain, [False] * len(domain.holes))
    numerator = _pfaffian_of_points(cover, a, marked, witness)
    denominator = _pfaffian_of_points(trivial, a, marked, witness)
    check = report.check("pfaffian_ratio")
    if denominator == 0:
        check.record(False, {"cover": flags}, "trivial-cover Pfaffian vanishes")
        return
    branched = [j for j, flag in enumerate(cover.branch_flags) if flag]
    bc = BoundaryCondition.alternating((a.point,) + marked + (witness,))
    e_alt = spin_sum(domain, bc, branched) * partition_fn(domain, bc).real_inverse()
    plus = BoundaryCondition.plus()
    e_plus = spin_sum(domain, plus, branched) * partition_fn(domain, plus).real_inverse()
    ratio = numerator * denominator.real_inverse()
    expected = e_alt * e_plus.real_inverse()
    check.record(ratio == expected, {"cover": flags, "witness": describe_point(witness)}, f"{ratio} != {expected}")
