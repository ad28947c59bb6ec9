"""
Mesh-refinement experiment: discrete double ratios on the punctured unit
square against the continuum ratio cos(pi * hm).
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import pandas as pd

from backend.config.settings import settings
from backend.services.catalogue_service import square
from backend.services.continuum_service import hm_numeric
from backend.services.enumeration_service import configuration_space
from backend.services.lattice_service import E, W, HalfEdge, build_cover, build_domain
from backend.services.solver_service import boundary_ratio, boundary_ratio_exact
from backend.utils.errors import MeshTooCoarse, PunctureOnBoundary, ToolkitInputError
from backend.utils.formatting import frame_to_csv

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["n", "delta", "ratio", "theta", "abs_error", "method", "seconds"]
UNIT_SQUARE = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))


@dataclass(frozen=True)
class ConvergenceSpec:
    """
    Unit square with a on the left side and b on the right side.

    a_height, b_height are continuum heights; the whiskers sit at vertex
    row floor(height * n). Left unset, a sits at the bottom row of the
    puncture face and b at its top row, which puts a centered puncture
    halfway between the two boundary arcs.
    """
    puncture: Tuple[float, float] = (0.5, 0.5)
    sizes: Tuple[int, ...] = (8, 16, 32)
    method: str = "solver"
    a_height: Optional[float] = None
    b_height: Optional[float] = None
    hm_grid: Optional[int] = None

    def __post_init__(self):
        x, y = self.puncture
        if not (0 < x < 1 and 0 < y < 1):
            raise PunctureOnBoundary(f"puncture {self.puncture} is not strictly inside the unit square",
                                     {"puncture": list(self.puncture)})
        if self.method not in ("solver", "enumeration"):
            raise ToolkitInputError(f"unknown method {self.method!r}")
        if not self.sizes or any(n < 1 for n in self.sizes):
            raise ToolkitInputError("mesh sizes must be positive")
        for h in (self.a_height, self.b_height):
            if h is not None and not 0 < h < 1:
                raise ToolkitInputError(f"marked point height {h} must lie strictly inside the side")


@dataclass
class ConvergenceRow:
    n: int
    delta: float
    ratio: float
    theta: float
    abs_error: float
    method: str
    seconds: float
    snapped: Tuple[float, float] = field(default=(0.0, 0.0))
    hm_error: float = 0.0


def snap_puncture(puncture: Tuple[float, float], n: int) -> Tuple[int, int]:
    """Face containing the puncture; it must not touch the outer boundary."""
    x, y = puncture
    face = (min(int(math.floor(x * n)), n - 1), min(int(math.floor(y * n)), n - 1))
    if not (0 < face[0] < n - 1 and 0 < face[1] < n - 1):
        raise MeshTooCoarse(f"puncture face {face} touches the boundary at n={n}", {"n": n, "face": list(face)})
    return face


def _row(height: Optional[float], n: int, default: int) -> int:
    if height is None:
        return default
    return min(max(int(math.floor(height * n)), 0), n)


def marked_points(spec: ConvergenceSpec, n: int) -> Tuple[HalfEdge, HalfEdge]:
    face_y = snap_puncture(spec.puncture, n)[1]
    row_a = _row(spec.a_height, n, face_y)
    row_b = _row(spec.b_height, n, face_y + 1)
    return HalfEdge((0, row_a), W), HalfEdge((n, row_b), E)


def dobrushin_arc(ya: float, yb: float):
    """Counterclockwise boundary arc from (0, ya) to (1, yb) on the unit square."""
    return [((0.0, ya), (0.0, 0.0)), ((0.0, 0.0), (1.0, 0.0)), ((1.0, 0.0), (1.0, yb))]


def run_row(spec: ConvergenceSpec, n: int) -> ConvergenceRow:
    started = time.perf_counter()
    face = snap_puncture(spec.puncture, n)
    domain = build_domain(square(n, [face]))
    cover = build_cover(domain, [True])
    trivial = build_cover(domain, [False])
    a, b = marked_points(spec, n)

    if spec.method == "enumeration":
        dim = configuration_space(domain).dimension
        if dim > settings.MAX_CYCLE_DIM:
            raise ToolkitInputError(f"cycle space of dimension {dim} is too large for enumeration at n={n}")
        ratio = boundary_ratio_exact(domain, cover, trivial, a, b).to_complex().real
    else:
        ratio = boundary_ratio(domain, cover, trivial, a, b)

    snapped = ((face[0] + 0.5) / n, (face[1] + 0.5) / n)
    hm = hm_numeric(UNIT_SQUARE, snapped, dobrushin_arc(a.vertex[1] / n, b.vertex[1] / n),
                    spec.hm_grid or n * math.ceil(settings.HM_GRID / n))
    theta = math.cos(math.pi * hm.value)
    seconds = time.perf_counter() - started
    logger.info(f"Convergence n={n}: ratio {ratio:.6f}, theta {theta:.6f}, {seconds:.2f}s")
    return ConvergenceRow(n, 1.0 / n, float(ratio), theta, abs(ratio - theta), spec.method, seconds,
                          snapped, hm.error)


def run_convergence(spec: ConvergenceSpec, workers: Optional[int] = None) -> List[ConvergenceRow]:
    """
    One row per mesh size, ordered as spec.sizes.

    Args:
        spec: experiment description
        workers: thread count (default CONVERGENCE_WORKERS)
    """
    workers = workers or settings.CONVERGENCE_WORKERS
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda n: run_row(spec, n), spec.sizes))
    return [run_row(spec, n) for n in spec.sizes]


def rows_frame(rows: Sequence[ConvergenceRow]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in rows])


def rows_to_csv(rows: Sequence[ConvergenceRow], path: Optional[Path] = None, timing: bool = True) -> str:
    """CSV with the fixed column order and 17 significant digits; timing=False zeroes the seconds column."""
    frame = rows_frame(rows)[CSV_COLUMNS].copy() if rows else pd.DataFrame(columns=CSV_COLUMNS)
    if not timing:
        frame["seconds"] = 0.0
    return frame_to_csv(frame, path)
