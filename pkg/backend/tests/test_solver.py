"""
Numerical boundary value problem, the H function and boundary double ratios
"""

from dataclasses import replace
from fractions import Fraction

import pytest

from backend.services.catalogue_service import square
from backend.services.lattice_service import E, CoverPoint, Edge, HalfEdge, build_cover, build_domain
from backend.services.observable_service import SpinorField, observable_field
from backend.services.qcyc import I_UNIT, ONE, ZERO, Q8Number
from backend.services.solver_service import (
    boundary_ratio,
    boundary_ratio_exact,
    build_corner_system,
    build_h,
    check_h_properties,
    field_difference,
    solve_bvp,
    solve_homogeneous,
)
from backend.utils.errors import ClosureViolation, ToolkitInputError


def test_corner_system_shape(annulus_covers, corner_source):
    _, branched = annulus_covers
    system = build_corner_system(branched, CoverPoint(corner_source, 1))
    assert system.solve_rows == system.unknowns
    assert system.matrix.shape[0] == system.solve_rows + 1


@pytest.mark.parametrize("faces", [square(1), square(2), square(3, [(1, 1)])])
def test_solver_matches_enumeration(faces, corner_source):
    domain = build_domain(faces)
    for flags in ([False] * len(domain.holes), [True] * len(domain.holes)):
        cover = build_cover(domain, flags)
        a = CoverPoint(corner_source, 1)
        solved = solve_bvp(cover, a)
        assert field_difference(solved, observable_field(cover, a)) < 1e-8
        assert solved.residual <= 1e-10


def test_homogeneous_problem_has_only_zero(annulus_covers, corner_source):
    for cover in annulus_covers:
        result = solve_homogeneous(cover, CoverPoint(corner_source, 1))
        assert result.norm < 1e-10
        assert result.smallest_singular_value > 0


def test_h_of_constant_field(block2, corner_source):
    cover = build_cover(block2, [])
    field_ = SpinorField(cover, CoverPoint(corner_source, 1), {p: ONE for p in block2.points})
    h = build_h(field_)
    root = (-1, -1)
    assert h.closure_defect == 0
    for v, x in h.vertex_values.items():
        assert x - h.cell_values[root] == Q8Number.from_sqrt2_form(Fraction(2 * (v[1] - root[1]) - 1, 2), Fraction(1, 2))
    for c, x in h.cell_values.items():
        assert x - h.cell_values[root] == Q8Number(c[1] - root[1])


def test_h_closes_exactly_on_annulus(annulus_covers, corner_source):
    _, branched = annulus_covers
    h = build_h(observable_field(branched, CoverPoint(corner_source, 1)))
    assert h.closure_defect == 0
    assert set(h.constants) == {-1, 0}


def test_perturbed_field_does_not_close(annulus_covers, corner_source):
    _, branched = annulus_covers
    field_ = observable_field(branched, CoverPoint(corner_source, 1))
    with pytest.raises(ClosureViolation) as info:
        build_h(field_.perturbed(Edge((1, 1), (2, 1)), ONE))
    assert "corner" in info.value.locus


def test_h_properties_of_exact_field(block3, corner_source):
    h = build_h(observable_field(build_cover(block3, []), CoverPoint(corner_source, 1)))
    report = check_h_properties(h)
    assert report.passed, report.first_failure()
    assert not check_h_properties(h.negated()).passed


def test_boundary_monotone_fails_when_f_leaves_eta(block3, corner_source):
    h = build_h(observable_field(build_cover(block3, []), CoverPoint(corner_source, 1)))
    assert h.boundary_values[HalfEdge((3, 3), E)] != ZERO
    turned = dict(h.boundary_values)
    turned[HalfEdge((3, 3), E)] = I_UNIT * turned[HalfEdge((3, 3), E)]
    report = check_h_properties(replace(h, boundary_values=turned))
    monotone = report.checks["boundary_monotone"]
    assert not monotone.passed
    assert monotone.locus == {"half_edge": [[3, 3], "E"]}


def test_h_properties_of_solver_field(corner_source):
    domain = build_domain(square(8))
    h = build_h(solve_bvp(build_cover(domain, []), CoverPoint(corner_source, 1)))
    report = check_h_properties(h)
    assert report.passed, report.first_failure()
    assert report.checks["vertex_subharmonic"].checked == 49


def test_trivial_cover_ratio_is_one(annulus, annulus_covers, corner_source):
    trivial, _ = annulus_covers
    b = HalfEdge((3, 3), E)
    assert boundary_ratio(annulus, trivial, trivial, corner_source, b) == pytest.approx(1.0, abs=1e-10)
    assert boundary_ratio_exact(annulus, trivial, trivial, corner_source, b) == ONE


def test_symmetric_annulus_ratio_vanishes(annulus, annulus_covers, corner_source):
    trivial, branched = annulus_covers
    b = HalfEdge((3, 3), E)
    assert abs(boundary_ratio(annulus, branched, trivial, corner_source, b)) < 1e-8
    assert boundary_ratio_exact(annulus, branched, trivial, corner_source, b) == ZERO


def test_ratio_needs_distinct_outer_points(annulus, annulus_covers, corner_source):
    trivial, branched = annulus_covers
    with pytest.raises(ToolkitInputError):
        boundary_ratio(annulus, branched, trivial, corner_source, corner_source)
    with pytest.raises(ToolkitInputError):
        boundary_ratio_exact(annulus, branched, trivial, corner_source, corner_source)
