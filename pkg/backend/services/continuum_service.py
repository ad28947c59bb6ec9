"""
Continuum objects: the punctured half-plane spinor and its ratio invariant,
harmonic measure (closed form in the half-plane, finite differences on
rectilinear polygons) and the Pfaffian ratio over 2n+2 boundary points.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from backend.config.settings import settings
from backend.services.lattice_service import encloses
from backend.services.observable_service import pfaffian
from backend.utils.errors import (
    DegenerateDenominator,
    NearDegenerate,
    NonRectilinear,
    NotInUpperHalfPlane,
    ToolkitInputError,
)

logger = logging.getLogger(__name__)

Segment = Tuple[Tuple[float, float], Tuple[float, float]]


@dataclass(frozen=True)
class ThetaSpec:
    """Punctures in the upper half-plane; marked points are a = infinity, b = 0."""
    punctures: Tuple[complex, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "punctures", tuple(complex(w) for w in self.punctures))
        for w in self.punctures:
            if not w.imag > 0:
                raise NotInUpperHalfPlane(f"puncture {w} is not in the upper half-plane", {"puncture": str(w)})
        tol = settings.THETA_COLLISION_TOL
        for j, wj in enumerate(self.punctures):
            for k in range(j):
                if abs(wj.real - self.punctures[k].real) < tol:
                    raise NearDegenerate(
                        f"punctures {self.punctures[k]} and {wj} share a real part",
                        {"punctures": [str(self.punctures[k]), str(wj)]},
                    )

    @property
    def m(self) -> int:
        return len(self.punctures)

    def scaled(self, s: float) -> "ThetaSpec":
        return ThetaSpec(tuple(s * w for w in self.punctures))


@dataclass
class ThetaResult:
    lambdas: List[float] = field(default_factory=list)
    residual: float = 0.0
    theta: float = 1.0

    def to_dict(self) -> Dict:
        return {"lambda": list(self.lambdas), "residual": self.residual, "theta": self.theta}


@dataclass
class HarmonicMeasure:
    value: float
    error: float
    n: int
    coarse: float
    fine: float


def parse_puncture(text: str) -> complex:
    """Accepts "x+yi" as well as Python's "x+yj"."""
    cleaned = text.strip().replace(" ", "").replace("i", "j")
    try:
        return complex(cleaned)
    except ValueError as e:
        raise ToolkitInputError(f"cannot parse puncture {text!r}") from e


def hm_half_plane(w: complex) -> float:
    """Harmonic measure of the negative real axis seen from w in the upper half-plane."""
    w = complex(w)
    if not w.imag > 0:
        raise NotInUpperHalfPlane(f"{w} is not in the upper half-plane", {"point": str(w)})
    return math.atan2(w.imag, w.real) / math.pi


def blaschke_factor(w: complex, z: complex) -> complex:
    """B_w(z) = (z - Re w) / sqrt((z - conj w)(z - w)), principal root."""
    return (z - w.real) / np.sqrt((z - w.conjugate()) * (z - w))


def _residue_phases(punctures: Sequence[complex]) -> np.ndarray:
    # normalized to unit modulus; the system is homogeneous in each R_k
    phases = []
    for k, wk in enumerate(punctures):
        r = complex(math.sqrt(wk.imag))
        for j, wj in enumerate(punctures):
            if j != k:
                r *= blaschke_factor(wj, wk)
        phases.append(r / abs(r))
    return np.array(phases, dtype=complex)


def theta(spec: ThetaSpec) -> ThetaResult:
    """
    Ratio of spin correlations in the punctured upper half-plane.

    Solves Im[R_k g(w_k)] = 0 for g(z) = 1 + sum_j lambda_j / (t_j - z),
    t_j = Re w_j, then evaluates g(0) * prod_j B_{w_j}(0) with
    B_{w_j}(0) = Re w_j / |w_j|.

    Args:
        spec: punctures

    Returns:
        ThetaResult with lambda, residual and theta
    """
    w = spec.punctures
    m = len(w)
    if m == 0:
        return ThetaResult([], 0.0, 1.0)
    if m == 1:
        return ThetaResult([0.0], 0.0, w[0].real / abs(w[0]))

    t = np.array([p.real for p in w])
    r = _residue_phases(w)
    matrix = np.array([[(r[k] / (t[j] - w[k])).imag for j in range(m)] for k in range(m)])
    rhs = -r.imag

    condition = np.linalg.cond(matrix)
    if not np.isfinite(condition) or condition > settings.THETA_CONDITION_MAX:
        raise NearDegenerate(f"lambda system is ill-conditioned (cond={condition:.3e})", {"condition": float(condition)})
    try:
        lambdas = scipy.linalg.solve(matrix, rhs)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        logger.error(f"Lambda system failed: {str(e)}")
        raise NearDegenerate(f"lambda system is singular: {str(e)}") from e

    g_at = [1 + sum(lambdas[j] / (t[j] - w[k]) for j in range(m)) for k in range(m)]
    residual = max(abs((r[k] * g_at[k]).imag) for k in range(m))
    if residual > settings.THETA_RESIDUAL_TOL:
        raise NearDegenerate(f"lambda system residual {residual:.3e} above tolerance", {"residual": residual})

    # [1 + sum lambda_j / t_j] * prod t_j, expanded so that t_j = 0 is allowed
    numerator = float(np.prod(t)) + sum(
        lambdas[j] * float(np.prod(np.delete(t, j))) for j in range(m)
    )
    value = numerator / float(np.prod([abs(p) for p in w]))
    logger.debug(f"theta for {m} punctures: {value}, residual {residual:.2e}")
    return ThetaResult([float(x) for x in lambdas], float(residual), float(value))


def theta_general_simply_connected(punctures: Sequence[complex],
                                   conformal_map: Optional[Callable[[complex], complex]] = None,
                                   harmonic_measure: Optional[float] = None) -> float:
    """
    theta(phi(z_1), ..., phi(z_m)) for phi mapping (Omega; a, b) to (C+; inf, 0).

    For a single puncture without a map, cos(pi * hm) with the harmonic
    measure of the arc (ab) supplied by the caller.
    """
    if conformal_map is None and harmonic_measure is not None:
        if len(punctures) != 1:
            raise ToolkitInputError("the harmonic-measure route needs exactly one puncture")
        return math.cos(math.pi * harmonic_measure)
    phi = conformal_map or (lambda z: z)
    return theta(ThetaSpec(tuple(phi(complex(z)) for z in punctures))).theta


def _on_segment(p: Tuple[float, float], seg: Segment, tol: float) -> bool:
    (x1, y1), (x2, y2) = seg
    px, py = p
    if abs(x1 - x2) < tol:
        return abs(px - x1) < tol and min(y1, y2) - tol <= py <= max(y1, y2) + tol
    return abs(py - y1) < tol and min(x1, x2) - tol <= px <= max(x1, x2) + tol


def _check_rectilinear(polygon: Sequence[Tuple[float, float]], arc: Sequence[Segment]) -> None:
    closed = list(polygon) + [polygon[0]]
    for (x1, y1), (x2, y2) in list(zip(closed, closed[1:])) + list(arc):
        if x1 != x2 and y1 != y2:
            raise NonRectilinear(f"segment {(x1, y1)}-{(x2, y2)} is neither horizontal nor vertical")


def _boundary_value(p: Tuple[float, float], arc: Sequence[Segment], ends: Dict[Tuple[float, float], int],
                    tol: float) -> float:
    for end, count in ends.items():
        if count % 2 and abs(p[0] - end[0]) < tol and abs(p[1] - end[1]) < tol:
            return 0.5
    return 1.0 if any(_on_segment(p, seg, tol) for seg in arc) else 0.0


def _solve_grid(polygon: Sequence[Tuple[float, float]], arc: Sequence[Segment], n: int,
                point: Tuple[float, float]) -> float:
    """5-point Dirichlet problem on the grid of spacing 1/n, read off bilinearly at point."""
    h = 1.0 / n
    tol = h * 1e-6
    xs = [x for x, _ in polygon]
    ys = [y for _, y in polygon]
    for c in xs + ys:
        if abs(c * n - round(c * n)) > 1e-9:
            raise NonRectilinear(f"polygon vertex coordinate {c} is not on the grid of spacing {h}")
    i0, i1 = round(min(xs) * n), round(max(xs) * n)
    j0, j1 = round(min(ys) * n), round(max(ys) * n)
    closed = list(polygon) + [polygon[0]]
    sides = list(zip(closed, closed[1:]))

    ends: Dict[Tuple[float, float], int] = {}
    for a, b in arc:
        ends[a] = ends.get(a, 0) + 1
        ends[b] = ends.get(b, 0) + 1

    values: Dict[Tuple[int, int], float] = {}
    interior: Dict[Tuple[int, int], int] = {}
    for i in range(i0, i1 + 1):
        for j in range(j0, j1 + 1):
            p = (i * h, j * h)
            if any(_on_segment(p, side, tol) for side in sides):
                values[(i, j)] = _boundary_value(p, arc, ends, tol)
            elif encloses(polygon, p):
                interior[(i, j)] = len(interior)

    rows, cols, data = [], [], []
    rhs = np.zeros(len(interior))
    for (i, j), k in interior.items():
        rows.append(k)
        cols.append(k)
        data.append(4.0)
        for nb in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if nb in interior:
                rows.append(k)
                cols.append(interior[nb])
                data.append(-1.0)
            else:
                rhs[k] += values.get(nb, 0.0)
    matrix = coo_matrix((data, (rows, cols)), shape=(len(interior), len(interior))).tocsr()
    solution = np.atleast_1d(spsolve(matrix, rhs))

    def grid_value(i: int, j: int) -> float:
        if (i, j) in interior:
            return float(solution[interior[(i, j)]])
        return values.get((i, j), 0.0)

    gx, gy = point[0] * n, point[1] * n
    i, j = math.floor(gx), math.floor(gy)
    fx, fy = gx - i, gy - j
    return (
        (1 - fx) * (1 - fy) * grid_value(i, j)
        + fx * (1 - fy) * grid_value(i + 1, j)
        + (1 - fx) * fy * grid_value(i, j + 1)
        + fx * fy * grid_value(i + 1, j + 1)
    )


def hm_numeric(polygon: Sequence[Tuple[float, float]], point: Tuple[float, float],
               arc: Sequence[Segment], n: Optional[int] = None) -> HarmonicMeasure:
    """
    Harmonic measure of a boundary arc on a rectilinear polygon.

    Grids of n and 2n points per unit length, combined by Richardson
    extrapolation (4*u_2n - u_n)/3 with error estimate |u_2n - u_n|/3.
    Arc endpoints carry the boundary value 1/2.

    Args:
        polygon: vertices in counterclockwise order
        point: evaluation point, strictly inside
        arc: boundary segments carrying the value 1
        n: grid points per unit length (default HM_GRID)
    """
    polygon = [(float(x), float(y)) for x, y in polygon]
    arc = [((float(a[0]), float(a[1])), (float(b[0]), float(b[1]))) for a, b in arc]
    if len(polygon) < 4:
        raise NonRectilinear("a rectilinear polygon needs at least four vertices")
    _check_rectilinear(polygon, arc)
    if not encloses(polygon, point):
        raise ToolkitInputError(f"point {point} is not inside the polygon")
    n = n or settings.HM_GRID
    coarse = _solve_grid(polygon, arc, n, point)
    fine = _solve_grid(polygon, arc, 2 * n, point)
    value = (4 * fine - coarse) / 3
    error = abs(fine - coarse) / 3
    logger.debug(f"hm_numeric at {point}: {value} +- {error:.2e} (n={n})")
    return HarmonicMeasure(value, error, n, coarse, fine)


def mobius_to_standard(a: float, b: float) -> Callable[[complex], complex]:
    """Maps (C+; a, b) to (C+; inf, 0); requires a < b."""
    if not a < b:
        raise ToolkitInputError(f"boundary points must increase, got {a} >= {b}")
    return lambda z: (z - b) / (z - a)


def pfaffian_ratio(points: Sequence[float], punctures: Sequence[complex]) -> float:
    """
    Pf[theta_jk / zeta_jk] / Pf[1 / zeta_jk] over 2n+2 ordered real points,
    zeta_ab = sqrt(pi) * |b - a|.
    """
    xs = [float(x) for x in points]
    if len(xs) < 2 or len(xs) % 2:
        raise ToolkitInputError(f"need an even number (>= 2) of boundary points, got {len(xs)}")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ToolkitInputError("boundary points must be distinct and increasing")
    ws = tuple(complex(w) for w in punctures)
    ThetaSpec(ws)

    size = len(xs)
    numerator = [[0.0] * size for _ in range(size)]
    denominator = [[0.0] * size for _ in range(size)]
    for j in range(size):
        for k in range(j + 1, size):
            zeta = math.sqrt(math.pi) * abs(xs[k] - xs[j])
            phi = mobius_to_standard(xs[j], xs[k])
            value = theta(ThetaSpec(tuple(phi(w) for w in ws))).theta
            numerator[j][k], numerator[k][j] = value / zeta, -value / zeta
            denominator[j][k], denominator[k][j] = 1.0 / zeta, -1.0 / zeta

    bottom = pfaffian(denominator)
    if abs(bottom) < settings.PFAFFIAN_DENOMINATOR_MIN:
        raise DegenerateDenominator(f"denominator Pfaffian {bottom:.3e} vanishes", {"denominator": float(bottom)})
    return float(pfaffian(numerator) / bottom)
