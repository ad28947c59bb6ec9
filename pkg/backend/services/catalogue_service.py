"""
Identity suite over the fixed domain catalogue.

Each entry runs the exact enumeration identities, the H-function checks on
the enumeration field, and the solver comparison for every double cover of
its domain.
"""

import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from backend.config.settings import settings
from backend.services.lattice_service import (
    E,
    N,
    S,
    W,
    CoverPoint,
    DoubleCover,
    HalfEdge,
    build_cover,
    build_domain,
)
from backend.services.observable_service import (
    IdentityReport,
    check_boundary,
    check_identities,
    check_s_holomorphic,
    observable_field,
)
from backend.services.solver_service import (
    build_h,
    check_h_properties,
    field_difference,
    solve_bvp,
    solve_homogeneous,
)
from backend.utils.errors import ToolkitError

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]


def square(n: int, removed: Sequence[Cell] = ()) -> List[Cell]:
    """Faces of the n x n square minus the removed ones."""
    gone = set(removed)
    return [(x, y) for x in range(n) for y in range(n) if (x, y) not in gone]


@dataclass(frozen=True)
class CatalogueEntry:
    name: str
    faces: Tuple[Cell, ...]
    source: HalfEdge = HalfEdge((0, 0), W)
    marked: Tuple[HalfEdge, ...] = ()
    witness: Optional[HalfEdge] = None
    compare_rules: bool = False


CATALOGUE: Tuple[CatalogueEntry, ...] = (
    CatalogueEntry("1x1", tuple(square(1)), compare_rules=True),
    CatalogueEntry("2x2", tuple(square(2)), compare_rules=True),
    CatalogueEntry("3x3", tuple(square(3))),
    CatalogueEntry("3x3 annulus", tuple(square(3, [(1, 1)])), compare_rules=True),
    CatalogueEntry("4x4 one hole", tuple(square(4, [(1, 1)]))),
    CatalogueEntry("4x4 two holes", tuple(square(4, [(1, 1), (2, 2)]))),
    CatalogueEntry(
        "2x2 four marked",
        tuple(square(2)),
        marked=(HalfEdge((1, 0), S), HalfEdge((2, 1), E)),
        witness=HalfEdge((1, 2), N),
    ),
    CatalogueEntry(
        "3x3 annulus four marked",
        tuple(square(3, [(1, 1)])),
        marked=(HalfEdge((2, 0), S), HalfEdge((3, 2), E)),
        witness=HalfEdge((1, 3), N),
    ),
)


@dataclass
class CatalogueReport:
    entries: List[Dict[str, Any]] = field(default_factory=list)
    cover_instances: int = 0
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(entry["pass"] for entry in self.entries)

    def first_failure(self) -> Optional[Dict[str, Any]]:
        for entry in self.entries:
            for name, check in entry["checks"].items():
                if not check["pass"]:
                    return {"entry": entry["label"], "check": name, **check}
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pass": self.passed,
            "domains": len(self.entries),
            "cover_instances": self.cover_instances,
            "seconds": self.seconds,
            "first_failure": self.first_failure(),
            "entries": self.entries,
        }


def all_covers(n_holes: int) -> List[Tuple[bool, ...]]:
    return list(itertools.product((False, True), repeat=n_holes))


def _merge(target: IdentityReport, other: IdentityReport, prefix: str) -> None:
    for name, check in other.checks.items():
        key = f"{prefix}.{name}"
        merged = target.check(key)
        merged.checked += check.checked
        if not check.passed and merged.passed:
            merged.passed = False
            merged.locus = check.locus
            merged.detail = check.detail


def check_solver(cover: DoubleCover, source: HalfEdge, report: IdentityReport) -> None:
    """Solver field against the enumeration field, H checks for both, homogeneous mode."""
    flags = [int(f) for f in cover.branch_flags]
    a = CoverPoint(source, 1)
    exact = observable_field(cover, a)
    try:
        _merge(report, check_h_properties(build_h(exact)), "h_exact")
    except ToolkitError as e:
        report.check("h_exact.closure").record(False, {"cover": flags, **e.locus}, e.message)

    try:
        solved = solve_bvp(cover, a)
    except ToolkitError as e:
        logger.error(f"Solver failed on cover {flags}: {str(e)}")
        report.check("solver_agreement").record(False, {"cover": flags, **e.locus}, e.message)
        return
    difference = field_difference(solved, exact)
    report.check("solver_agreement").record(
        difference < settings.ORACLE_TOL, {"cover": flags}, f"max difference {difference:.3e}"
    )
    tol = settings.PROPERTY_TOL
    check_s_holomorphic(solved, report.check("solver_s_holomorphicity"), flags, tol)
    check_boundary(solved, report.check("solver_boundary_condition"), flags, tol)
    try:
        _merge(report, check_h_properties(build_h(solved), tol), "h_solver")
    except ToolkitError as e:
        report.check("h_solver.closure").record(False, {"cover": flags, **e.locus}, e.message)

    homogeneous = solve_homogeneous(cover, a)
    report.check("homogeneous_zero").record(
        homogeneous.norm < 1e-10,
        {"cover": flags},
        f"norm {homogeneous.norm:.3e}, smallest singular value {homogeneous.smallest_singular_value:.3e}",
    )


def run_entry(entry: CatalogueEntry, flip_eta: bool = False, solver: bool = True) -> Tuple[Dict[str, Any], int]:
    started = time.perf_counter()
    domain = build_domain(entry.faces)
    covers = [build_cover(domain, flags) for flags in all_covers(len(domain.holes))]
    report = check_identities(
        domain,
        covers,
        entry.source,
        marked=entry.marked,
        witness=entry.witness,
        flip_eta=flip_eta,
        compare_rules=entry.compare_rules,
        label=entry.name,
    )
    if solver:
        for cover in covers:
            check_solver(cover, entry.source, report)
    out = report.to_dict()
    out["covers"] = [[int(f) for f in cover.branch_flags] for cover in covers]
    out["seconds"] = time.perf_counter() - started
    logger.info(f"Catalogue entry {entry.name}: {len(covers)} covers, {'pass' if report.passed else 'FAIL'}")
    return out, len(covers)


def run_catalogue(flip_eta: bool = False, solver: bool = True, workers: Optional[int] = None,
                  entries: Sequence[CatalogueEntry] = CATALOGUE) -> CatalogueReport:
    """
    Run the identity suite over the catalogue.

    Args:
        flip_eta: negate eta_a in every field (the sign-detector hook)
        solver: include the solver comparison and its H checks
        workers: thread count (default CATALOGUE_WORKERS)
        entries: catalogue entries to run

    Returns:
        CatalogueReport; failures are data, never raised
    """
    started = time.perf_counter()
    workers = workers or settings.CATALOGUE_WORKERS
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda e: run_entry(e, flip_eta, solver), entries))
    else:
        results = [run_entry(e, flip_eta, solver) for e in entries]

    report = CatalogueReport(
        entries=[out for out, _ in results],
        cover_instances=sum(count for _, count in results),
    )
    report.seconds = time.perf_counter() - started
    logger.info(
        f"Catalogue: {len(report.entries)} domains, {report.cover_instances} covers, "
        f"{'pass' if report.passed else 'FAIL'} in {report.seconds:.1f}s"
    )
    return report
