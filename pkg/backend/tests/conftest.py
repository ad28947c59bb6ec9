"""
Shared domain fixtures
"""

import pytest

from backend.services.catalogue_service import square
from backend.services.lattice_service import W, HalfEdge, build_cover, build_domain


@pytest.fixture
def single_cell():
    return build_domain([(0, 0)])


@pytest.fixture
def block2():
    return build_domain(square(2))


@pytest.fixture
def block3():
    return build_domain(square(3))


@pytest.fixture
def annulus():
    return build_domain(square(3, [(1, 1)]))


@pytest.fixture
def annulus_covers(annulus):
    return build_cover(annulus, [False]), build_cover(annulus, [True])


@pytest.fixture
def corner_source():
    return HalfEdge((0, 0), W)
