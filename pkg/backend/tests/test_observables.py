"""
Exact spinor observables and their identity checks
"""

import pytest

from backend.services.enumeration_service import Configuration
from backend.services.lattice_service import E, N, S, Corner, CoverPoint, Edge, HalfEdge, build_cover, eta_of
from backend.services.observable_service import (
    IdentityCheck,
    build_arcs,
    check_identities,
    check_s_holomorphic,
    complex_phase,
    multi_field,
    observable,
    observable_field,
    observable_literal,
    pfaffian,
)
from backend.services.qcyc import I_UNIT, ONE, ZERO, ZETA, Q8Number
from backend.utils.errors import InfeasibleSources, MarkedPointsNotOuterBoundary, NotAntisymmetric


def _chain(points):
    return frozenset(Edge(*sorted((p, q))) for p, q in zip(points, points[1:]))


def test_observable_matches_literal_sum(single_cell, corner_source):
    cover = build_cover(single_cell, [])
    a = CoverPoint(corner_source, 1)
    for p in single_cell.points:
        z = CoverPoint(p, 1)
        assert observable(cover, a, z) == observable_literal(cover, a, z)


def test_observable_matches_literal_sum_on_branched_annulus(annulus_covers, corner_source):
    _, branched = annulus_covers
    a = CoverPoint(corner_source, 1)
    for p in (HalfEdge((3, 0), E), HalfEdge((3, 3), N), Edge((1, 1), (2, 1)), Edge((2, 2), (2, 3))):
        z = CoverPoint(p, 1)
        assert observable(branched, a, z) == observable_literal(branched, a, z)


def test_field_is_antisymmetric_in_the_sheet(annulus_covers, corner_source):
    _, branched = annulus_covers
    field_ = observable_field(branched, CoverPoint(corner_source, 1))
    for p in branched.domain.points:
        assert field_.value(CoverPoint(p, -1)) == -field_.value(CoverPoint(p, 1))


def test_value_at_source_is_plus_partition(single_cell, corner_source):
    cover = build_cover(single_cell, [])
    a = CoverPoint(corner_source, 1)
    # Conf_+ of one cell weighs 1 + x^4
    expected = I_UNIT * eta_of(corner_source) * Q8Number.from_sqrt2_form(18, -12)
    assert observable(cover, a, a) == expected


def test_phase_sign_flips_around_branching_hole(annulus_covers, corner_source):
    trivial, branched = annulus_covers
    target = HalfEdge((3, 0), E)
    whiskers = frozenset({corner_source, target})
    below = Configuration(_chain([(0, 0), (1, 0), (2, 0), (3, 0)]), whiskers)
    above = Configuration(
        _chain([(0, 0), (0, 1), (0, 2), (0, 3), (1, 3), (2, 3), (3, 3), (3, 2), (3, 1), (3, 0)]),
        whiskers,
    )
    a = CoverPoint(corner_source, 1)
    z = CoverPoint(target, 1)
    assert complex_phase(trivial, z, below, a) == complex_phase(trivial, z, above, a)
    assert complex_phase(branched, z, below, a) == -complex_phase(branched, z, above, a)


def test_pfaffian_small_cases():
    assert pfaffian([]) == 1.0
    assert pfaffian([[ZERO, ZETA], [-ZETA, ZERO]]) == ZETA
    matrix = [[0, 1, 2, 3], [-1, 0, 4, 5], [-2, -4, 0, 6], [-3, -5, -6, 0]]
    assert pfaffian(matrix) == pytest.approx(8.0)
    assert pfaffian([[0.0, 2.5, 0.0], [-2.5, 0.0, 1.0], [0.0, -1.0, 0.0]]) == 0.0


def test_pfaffian_rejects_non_antisymmetric():
    with pytest.raises(NotAntisymmetric):
        pfaffian([[0, 1], [1, 0]])
    with pytest.raises(NotAntisymmetric):
        pfaffian([[0, 1, 2], [-1, 0]])


def test_identities_hold_on_single_cell(single_cell, corner_source):
    report = check_identities(single_cell, [build_cover(single_cell, [])], corner_source, compare_rules=True)
    assert report.passed, report.first_failure()
    assert report.checks["s_holomorphicity"].checked == 16


def test_identities_hold_on_both_annulus_covers(annulus, annulus_covers, corner_source):
    report = check_identities(annulus, list(annulus_covers), corner_source, compare_rules=True)
    assert report.passed, report.first_failure()
    for name in ("antisymmetry", "s_holomorphicity", "boundary_condition", "spin_correlation",
                 "positivity", "boundary_modulus", "resolution_independence"):
        assert report.checks[name].checked > 0


def test_multi_point_identities_hold(block2, corner_source):
    report = check_identities(
        block2,
        [build_cover(block2, [])],
        corner_source,
        marked=[HalfEdge((1, 0), S), HalfEdge((2, 1), E)],
        witness=HalfEdge((1, 2), N),
    )
    assert report.passed, report.first_failure()
    assert "pfaffian_ratio" in report.checks


def test_flipped_eta_breaks_spin_correlation(single_cell, corner_source):
    report = check_identities(single_cell, [build_cover(single_cell, [])], corner_source, flip_eta=True)
    assert not report.passed
    assert not report.checks["spin_correlation"].passed
    assert report.to_dict()["pass"] is False


def test_perturbed_field_fails_s_holomorphicity(block2, corner_source):
    field_ = observable_field(build_cover(block2, []), CoverPoint(corner_source, 1))
    check = IdentityCheck("s_holomorphicity")
    check_s_holomorphic(field_.perturbed(Edge((1, 1), (2, 1)), ONE), check)
    assert not check.passed
    assert "corner" in check.locus


def test_multi_field_without_marked_points(single_cell, corner_source):
    cover = build_cover(single_cell, [])
    a = CoverPoint(corner_source, 1)
    plain = observable_field(cover, a)
    multi = multi_field(cover, build_arcs(cover, a, []))
    assert multi.values == plain.values


def test_build_arcs_validation(block2, corner_source):
    cover = build_cover(block2, [])
    a = CoverPoint(corner_source, 1)
    with pytest.raises(InfeasibleSources):
        build_arcs(cover, a, [HalfEdge((1, 0), S)])
    with pytest.raises(MarkedPointsNotOuterBoundary):
        build_arcs(cover, a, [HalfEdge((2, 1), E), HalfEdge((1, 0), S)])


def test_corners_next_to_the_source_are_s_holomorphic(single_cell, corner_source):
    field_ = observable_field(build_cover(single_cell, []), CoverPoint(corner_source, 1))
    check = IdentityCheck("s_holomorphicity")
    check_s_holomorphic(field_, check)
    assert check.passed, check.locus
    assert check.checked == 16


def test_half_edges_weigh_half_an_edge():
    whiskers = frozenset({HalfEdge((0, 0), S), HalfEdge((1, 0), E)})
    assert Configuration(_chain([(0, 0), (1, 0)]), whiskers).size == 2
    assert Configuration(frozenset(), frozenset({HalfEdge((0, 0), S)}), tail=((0, 0), 0)).size == 1


def test_corner_directions_without_the_factor_i_break_projections(single_cell, corner_source):
    field_ = observable_field(build_cover(single_cell, []), CoverPoint(corner_source, 1))
    mismatched = 0
    for v in single_cell.vertices:
        for k in range(4):
            e2 = I_UNIT * eta_of(Corner(v, k))
            first, second = field_.local_value(v, k), field_.local_value(v, (k + 1) % 4)
            mismatched += first + e2 * first.conj() != second + e2 * second.conj()
    assert mismatched > 0
