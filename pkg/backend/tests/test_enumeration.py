"""
Configuration enumeration, decomposition and exact partition functions
"""

from fractions import Fraction

import pytest

from backend.services.enumeration_service import (
    BoundaryCondition,
    Configuration,
    configuration_space,
    decompose,
    enumerate_configs,
    partition_fn,
    raw_filter,
    spin_expectation,
    x_power,
)
from backend.services.lattice_service import E, N, S, W, Edge, HalfEdge, build_cover
from backend.services.qcyc import ONE, ZERO, Q8Number
from backend.utils.errors import (
    ComponentNotFound,
    InfeasibleSources,
    MarkedPointsNotOuterBoundary,
    SourcesNotInBoundaryOfS,
    ToolkitInputError,
)

CYCLE = frozenset({
    Edge((0, 0), (1, 0)),
    Edge((1, 0), (1, 1)),
    Edge((0, 1), (1, 1)),
    Edge((0, 0), (0, 1)),
})


def test_single_cell_plus_configurations(single_cell):
    configs = set(enumerate_configs(single_cell, []))
    assert configs == {Configuration(frozenset()), Configuration(CYCLE)}


def test_doubled_source_cancels(single_cell):
    a = HalfEdge((0, 0), W)
    assert set(enumerate_configs(single_cell, [a, a])) == set(enumerate_configs(single_cell, []))


def test_sources_at_one_vertex_match_raw_filter(single_cell):
    sources = [HalfEdge((0, 0), W), HalfEdge((0, 0), S)]
    streamed = set(enumerate_configs(single_cell, sources))
    assert streamed == set(raw_filter(single_cell, sources))
    assert len(streamed) == 2


def test_sources_across_the_cell_match_raw_filter(single_cell):
    sources = [HalfEdge((0, 0), W), HalfEdge((1, 1), E)]
    streamed = set(enumerate_configs(single_cell, sources))
    assert streamed == set(raw_filter(single_cell, sources))
    assert all(c.degree((0, 0)) % 2 == 0 for c in streamed)


def test_sources_must_be_half_edges(single_cell):
    with pytest.raises(InfeasibleSources):
        list(enumerate_configs(single_cell, [Edge((0, 0), (1, 0))]))
    with pytest.raises(InfeasibleSources):
        list(enumerate_configs(single_cell, [HalfEdge((0, 0), E)]))


def test_odd_source_count_is_infeasible(single_cell):
    with pytest.raises(InfeasibleSources):
        list(enumerate_configs(single_cell, [HalfEdge((0, 0), W)]))


def test_cycle_space_dimension(block3, annulus):
    assert configuration_space(block3).dimension == 9
    assert configuration_space(annulus).dimension == 9


def test_raw_filter_refuses_large_domains(block2):
    with pytest.raises(ToolkitInputError):
        raw_filter(block2)


def test_single_cell_plus_partition(single_cell):
    # 1 + x^4 with x = sqrt(2) - 1
    assert partition_fn(single_cell, BoundaryCondition.plus()) == Q8Number.from_sqrt2_form(18, -12)


def test_free_partition_matches_raw_filter(single_cell):
    expected = ZERO
    for config in raw_filter(single_cell, None):
        expected = expected + x_power(config.size)
    assert partition_fn(single_cell, BoundaryCondition.free()) == expected


def test_empty_expectation_is_one(block2):
    assert spin_expectation(block2, BoundaryCondition.plus(), []) == ONE


def test_single_cell_spin_under_plus(single_cell):
    # (1 - x^4) / (1 + x^4)
    value = spin_expectation(single_cell, BoundaryCondition.plus(), [(0, 0)])
    assert value == Q8Number.from_sqrt2_form(0, Fraction(2, 3))


def test_symmetric_dobrushin_center_vanishes(block3):
    bc = BoundaryCondition.dobrushin(HalfEdge((0, 0), W), HalfEdge((3, 3), E))
    assert spin_expectation(block3, bc, [(1, 1)]) == ZERO


def test_free_expectation_rejected(single_cell):
    with pytest.raises(ToolkitInputError):
        spin_expectation(single_cell, BoundaryCondition.free(), [(0, 0)])


def test_unknown_component(annulus):
    with pytest.raises(ComponentNotFound):
        spin_expectation(annulus, BoundaryCondition.plus(), [3])
    with pytest.raises(ComponentNotFound):
        spin_expectation(annulus, BoundaryCondition.plus(), [(1, 1)])


def test_marked_points_must_be_ordered(block2):
    bc = BoundaryCondition.alternating(
        [HalfEdge((1, 0), S), HalfEdge((1, 2), N), HalfEdge((2, 1), E), HalfEdge((0, 1), W)]
    )
    with pytest.raises(MarkedPointsNotOuterBoundary):
        partition_fn(block2, bc)
    with pytest.raises(InfeasibleSources):
        partition_fn(block2, BoundaryCondition.alternating([HalfEdge((1, 0), S)]))


def test_decompose_empty_configuration(single_cell, corner_source):
    parts = decompose(Configuration(frozenset()), corner_source, corner_source)
    assert parts.winding == 0
    assert parts.loops == []


def test_decompose_single_loop(single_cell, corner_source):
    parts = decompose(Configuration(CYCLE), corner_source, corner_source)
    assert len(parts.loops) == 1
    assert [abs(q) for q in parts.loop_windings] == [4]


def test_decompose_straight_path(single_cell, corner_source):
    target = HalfEdge((1, 0), E)
    config = Configuration(frozenset({Edge((0, 0), (1, 0))}), frozenset({corner_source, target}))
    cover = build_cover(single_cell, [])
    parts = decompose(config, corner_source, target, cover)
    assert parts.winding == 0
    assert parts.end == ("whisker", target)
    assert parts.path_sheet == 1


def test_decompose_wrong_target(single_cell, corner_source):
    target = HalfEdge((1, 0), E)
    config = Configuration(frozenset({Edge((0, 0), (1, 0))}), frozenset({corner_source, target}))
    with pytest.raises(SourcesNotInBoundaryOfS):
        decompose(config, corner_source, HalfEdge((1, 1), N))
