"""
Continuum ratios, harmonic measure and Pfaffian ratios
"""

import math

import numpy as np
import pytest

from backend.services.continuum_service import (
    ThetaSpec,
    blaschke_factor,
    hm_half_plane,
    hm_numeric,
    mobius_to_standard,
    parse_puncture,
    pfaffian_ratio,
    theta,
    theta_general_simply_connected,
)
from backend.services.convergence_service import UNIT_SQUARE, dobrushin_arc
from backend.utils.errors import (
    DegenerateDenominator,
    NearDegenerate,
    NonRectilinear,
    NotInUpperHalfPlane,
    ToolkitInputError,
)

SAMPLES = [
    (0.3 + 1.0j, -0.7 + 0.5j),
    (1.5 + 0.2j, -0.4 + 2.0j, 0.1 + 0.9j),
    (2.0 + 1.0j, -1.0 + 1.0j, 0.5 + 0.25j, -3.0 + 4.0j),
]


def test_parse_puncture():
    assert parse_puncture("1+1i") == 1 + 1j
    assert parse_puncture(" -0.5 + 2i ") == -0.5 + 2j
    assert parse_puncture("3j") == 3j
    with pytest.raises(ToolkitInputError):
        parse_puncture("one")


def test_hm_half_plane():
    assert hm_half_plane(1j) == pytest.approx(0.5)
    assert hm_half_plane(1 + 1j) == pytest.approx(0.25)
    assert hm_half_plane(-1 + 1j) == pytest.approx(0.75)
    with pytest.raises(NotInUpperHalfPlane):
        hm_half_plane(-1j)


def test_blaschke_factor():
    w = 0.6 + 0.8j
    assert blaschke_factor(w, w.real) == 0
    assert abs(blaschke_factor(w, 0)) == pytest.approx(w.real / abs(w))


def test_theta_without_punctures():
    result = theta(ThetaSpec())
    assert result.theta == 1.0
    assert result.to_dict() == {"lambda": [], "residual": 0.0, "theta": 1.0}


def test_theta_single_puncture():
    assert theta(ThetaSpec((1 + 1j,))).theta == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert theta(ThetaSpec((1j,))).theta == 0.0


def test_theta_single_puncture_grid():
    for x in np.linspace(-3.0, 3.0, 10):
        for y in np.linspace(0.1, 2.0, 10):
            w = complex(x, y)
            assert theta(ThetaSpec((w,))).theta == pytest.approx(w.real / abs(w), abs=1e-12)
            assert theta(ThetaSpec((w,))).theta == pytest.approx(math.cos(math.pi * hm_half_plane(w)), abs=1e-12)


@pytest.mark.parametrize("punctures", SAMPLES)
def test_theta_lambda_system(punctures):
    result = theta(ThetaSpec(punctures))
    assert len(result.lambdas) == len(punctures)
    assert result.residual < 1e-12
    assert math.isfinite(result.theta)


@pytest.mark.parametrize("punctures", SAMPLES)
def test_theta_is_dilation_invariant(punctures):
    spec = ThetaSpec(punctures)
    assert theta(spec.scaled(3.7)).theta == pytest.approx(theta(spec).theta, abs=1e-9)


@pytest.mark.parametrize("punctures", SAMPLES)
def test_theta_is_permutation_invariant(punctures):
    forward = theta(ThetaSpec(punctures)).theta
    backward = theta(ThetaSpec(tuple(reversed(punctures)))).theta
    assert backward == pytest.approx(forward, abs=1e-9)


def test_theta_allows_puncture_on_imaginary_axis():
    result = theta(ThetaSpec((1j, 1 + 2j)))
    assert math.isfinite(result.theta)


def test_theta_rejects_bad_punctures():
    with pytest.raises(NotInUpperHalfPlane):
        ThetaSpec((1 - 1j,))
    with pytest.raises(NotInUpperHalfPlane):
        ThetaSpec((2.0,))
    with pytest.raises(NearDegenerate):
        ThetaSpec((1 + 1j, 1 + 2j))


def test_theta_general_routes():
    w = -0.3 + 0.8j
    assert theta_general_simply_connected([w]) == pytest.approx(w.real / abs(w))
    assert theta_general_simply_connected([w], harmonic_measure=hm_half_plane(w)) == pytest.approx(w.real / abs(w))
    # z -> 2z leaves the ratio unchanged
    assert theta_general_simply_connected(list(SAMPLES[0]), conformal_map=lambda z: 2 * z) == pytest.approx(
        theta(ThetaSpec(SAMPLES[0])).theta, abs=1e-9
    )
    with pytest.raises(ToolkitInputError):
        theta_general_simply_connected([1j, 1 + 1j], harmonic_measure=0.5)


def test_hm_numeric_symmetric_square():
    hm = hm_numeric(UNIT_SQUARE, (0.5, 0.5), dobrushin_arc(0.5, 0.5), n=16)
    assert hm.value == pytest.approx(0.5, abs=1e-9)


def test_hm_numeric_one_side():
    bottom = [((0.0, 0.0), (1.0, 0.0))]
    hm = hm_numeric(UNIT_SQUARE, (0.5, 0.5), bottom, n=16)
    assert hm.value == pytest.approx(0.25, abs=1e-9)


def test_hm_numeric_error_estimate():
    hm = hm_numeric(UNIT_SQUARE, (0.5, 0.25), dobrushin_arc(0.5, 0.5))
    assert hm.value > 0.5
    assert hm.error == pytest.approx(abs(hm.fine - hm.coarse) / 3)
    assert hm.error < 1e-3


def test_hm_numeric_large_box_approaches_half_plane():
    box = [(-16, 0), (16, 0), (16, 16), (-16, 16)]
    hm = hm_numeric(box, (0.0, 1.0), [((-16, 0), (0, 0))], n=4)
    assert hm.value == pytest.approx(hm_half_plane(1j), abs=0.05)


def test_hm_numeric_input_errors():
    with pytest.raises(NonRectilinear):
        hm_numeric([(0, 0), (1, 0), (1, 1), (0.5, 1.5)], (0.5, 0.5), [])
    with pytest.raises(NonRectilinear):
        hm_numeric([(0, 0), (1, 0), (0, 1)], (0.2, 0.2), [])
    with pytest.raises(NonRectilinear):
        hm_numeric([(0, 0), (0.3, 0), (0.3, 1), (0, 1)], (0.1, 0.5), [], n=4)
    with pytest.raises(ToolkitInputError):
        hm_numeric(UNIT_SQUARE, (2.0, 0.5), [])


def test_mobius_to_standard():
    phi = mobius_to_standard(-1.0, 1.0)
    assert phi(1.0) == 0
    assert phi(1j) == pytest.approx(1j)
    with pytest.raises(ToolkitInputError):
        mobius_to_standard(1.0, 1.0)


def test_pfaffian_ratio_without_punctures():
    assert pfaffian_ratio([0.0, 1.0], []) == pytest.approx(1.0)
    assert pfaffian_ratio([-2.0, -1.0, 0.5, 3.0], []) == pytest.approx(1.0)


def test_pfaffian_ratio_two_points_is_theta():
    w = 0.4 + 1.3j
    expected = theta(ThetaSpec((mobius_to_standard(-1.0, 1.0)(w),))).theta
    assert pfaffian_ratio([-1.0, 1.0], [w]) == pytest.approx(expected, abs=1e-12)


def test_pfaffian_ratio_four_points():
    xs = [-2.0, -0.5, 1.0, 2.5]
    w = 0.3 + 0.7j

    def entry(j, k, weighted):
        zeta = math.sqrt(math.pi) * (xs[k] - xs[j])
        value = theta(ThetaSpec((mobius_to_standard(xs[j], xs[k])(w),))).theta if weighted else 1.0
        return value / zeta

    def pf(weighted):
        return (
            entry(0, 1, weighted) * entry(2, 3, weighted)
            - entry(0, 2, weighted) * entry(1, 3, weighted)
            + entry(0, 3, weighted) * entry(1, 2, weighted)
        )

    assert pfaffian_ratio(xs, [w]) == pytest.approx(pf(True) / pf(False), rel=1e-10)


def test_pfaffian_ratio_input_errors():
    with pytest.raises(ToolkitInputError):
        pfaffian_ratio([0.0, 1.0, 2.0], [])
    with pytest.raises(ToolkitInputError):
        pfaffian_ratio([1.0, 0.0], [])
    with pytest.raises(NotInUpperHalfPlane):
        pfaffian_ratio([0.0, 1.0], [1 - 1j])


def test_degenerate_denominator(monkeypatch):
    from backend.config.settings import settings

    monkeypatch.setattr(settings, "PFAFFIAN_DENOMINATOR_MIN", 1e6)
    with pytest.raises(DegenerateDenominator):
        pfaffian_ratio([0.0, 1.0], [])
