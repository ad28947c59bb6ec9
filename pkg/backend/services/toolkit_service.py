"""
Request handlers shared by the CLI and the HTTP router.

Each handler takes a validated request model and returns a JSON-ready
dict; identity results carry a "pass" key.
"""

import itertools
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence

import pandas as pd

from backend.config.settings import settings
from backend.schemas.schemas import (
    CatalogueRequest,
    CheckRequest,
    ConvergeRequest,
    EnumerateRequest,
    ObservableRequest,
    PartitionRequest,
    PfratioRequest,
    SolveRequest,
    ThetaRequest,
    ValidateRequest,
)
from backend.services.catalogue_service import all_covers, run_catalogue
from backend.services.continuum_service import ThetaSpec, parse_puncture, pfaffian_ratio, theta
from backend.services.convergence_service import ConvergenceSpec, rows_to_csv, run_convergence
from backend.services.enumeration_service import (
    BoundaryCondition,
    configuration_space,
    enumerate_configs,
    partition_fn,
    spin_expectation,
    x_power,
)
from backend.services.lattice_service import CoverPoint, Edge, Point, build_cover, describe_point, validate
from backend.services.observable_service import (
    build_arcs,
    check_identities,
    multi_field,
    observable_field,
)
from backend.services.solver_service import (
    build_h,
    check_h_properties,
    field_difference,
    solve_bvp,
    solve_homogeneous,
)
from backend.utils.formatting import VALUE_COLUMNS, frame_to_csv, value_columns, value_payload

logger = logging.getLogger(__name__)


def handle_validate(req: ValidateRequest) -> Dict[str, Any]:
    domain = req.domain.build()
    faults = validate(domain)
    if req.domain.branch is not None:
        req.domain.cover(domain)
    return {
        "valid": not faults,
        "faults": faults,
        "vertices": len(domain.vertices),
        "edges": len(domain.edges),
        "half_edges": len(domain.half_edges),
        "holes": len(domain.holes),
    }


def point_label(p: Point) -> str:
    if isinstance(p, Edge):
        return f"({p.v1[0]};{p.v1[1]})-({p.v2[0]};{p.v2[1]})"
    return f"({p.vertex[0]};{p.vertex[1]}){p.name}"


def _value_csv(rows: Sequence[Dict[str, Any]], leading: List[str]) -> str:
    return frame_to_csv(pd.DataFrame(list(rows), columns=leading + VALUE_COLUMNS))


def handle_enumerate(req: EnumerateRequest) -> Dict[str, Any]:
    domain = req.domain.build()
    sources = [p.to_point() for p in req.sources]
    configs = list(itertools.islice(enumerate_configs(domain, sources), max(req.limit, 0)))
    dimension = configuration_space(domain).dimension
    rows = [
        {
            "index": k,
            "edges": " ".join(point_label(e) for e in sorted(c.edges)),
            "half_edges": " ".join(point_label(h) for h in sorted(c.half_edges)),
            "size": c.size,
            **value_columns(x_power(c.size)),
        }
        for k, c in enumerate(configs)
    ]
    return {
        "dimension": dimension,
        "count": 2 ** dimension,
        "configurations": [
            {
                "edges": [[list(e.v1), list(e.v2)] for e in sorted(c.edges)],
                "half_edges": [describe_point(h) for h in sorted(c.half_edges)],
            }
            for c in configs
        ],
        "csv": _value_csv(rows, ["index", "edges", "half_edges", "size"]),
    }


def _boundary_condition(req: PartitionRequest) -> BoundaryCondition:
    marked = [h.to_half_edge() for h in req.bc.marked]
    if req.bc.kind == "plus":
        return BoundaryCondition.plus()
    if req.bc.kind == "free":
        return BoundaryCondition.free()
    if req.bc.kind == "dobrushin":
        return BoundaryCondition.dobrushin(*marked) if len(marked) == 2 else BoundaryCondition.alternating(marked)
    return BoundaryCondition.alternating(marked)


def handle_partition(req: PartitionRequest) -> Dict[str, Any]:
    domain = req.domain.build()
    bc = _boundary_condition(req)
    quantities = {"partition": partition_fn(domain, bc)}
    if req.components:
        components = [c if isinstance(c, int) else tuple(c) for c in req.components]
        quantities["expectation"] = spin_expectation(domain, bc, components)
    out: Dict[str, Any] = {name: value_payload(x) for name, x in quantities.items()}
    out["csv"] = _value_csv([{"quantity": name, **value_columns(x)} for name, x in quantities.items()], ["quantity"])
    return out


def handle_observable(req: ObservableRequest) -> Dict[str, Any]:
    domain = req.domain.build()
    cover = req.domain.cover(domain)
    a = CoverPoint(req.source.to_half_edge(), 1)
    if req.marked:
        field_ = multi_field(cover, build_arcs(cover, a, [h.to_half_edge() for h in req.marked]), req.rule)
    else:
        field_ = observable_field(cover, a, rule=req.rule)
    if req.targets is None:
        targets = [CoverPoint(p, 1) for p in domain.points]
    else:
        targets = [t.to_cover_point() for t in req.targets]
    values = [(z, field_.value(z)) for z in targets]
    rows = [{"point": point_label(z.point), "sheet": z.sheet, **value_columns(x)} for z, x in values]
    return {
        "values": [
            {"point": describe_point(z.point), "sheet": z.sheet, "value": value_payload(x)} for z, x in values
        ],
        "csv": _value_csv(rows, ["point", "sheet"]),
    }


def handle_check(req: CheckRequest) -> Dict[str, Any]:
    domain = req.domain.build()
    if req.domain.branch is not None:
        covers = [req.domain.cover(domain)]
    else:
        covers = [build_cover(domain, flags, req.domain.strategy) for flags in all_covers(len(domain.holes))]
    report = check_identities(
        domain,
        covers,
        req.source.to_half_edge(),
        marked=[h.to_half_edge() for h in req.marked],
        witness=req.witness.to_half_edge() if req.witness else None,
        flip_eta=req.flip_eta,
        compare_rules=req.compare_rules,
    )
    return report.to_dict()


def handle_solve(req: SolveRequest) -> Dict[str, Any]:
    domain = req.domain.build()
    cover = req.domain.cover(domain)
    a = CoverPoint(req.source.to_half_edge(), 1)
    field_ = solve_bvp(cover, a)
    rows = []
    for p, v in field_.values.items():
        at = p.midpoint(domain.delta) if isinstance(p, Edge) else p.tip(domain.delta)
        rows.append({"point": point_label(p), "x": at.real, "y": at.imag, "re": v.real, "im": v.imag})
    out: Dict[str, Any] = {
        "residual": field_.residual,
        "values": [
            {"point": describe_point(p), "value": value_payload(v)} for p, v in field_.values.items()
        ],
        "csv": frame_to_csv(pd.DataFrame(rows, columns=["point", "x", "y", "re", "im"])),
    }
    passed = True
    if req.compare:
        difference = field_difference(field_, observable_field(cover, a))
        out["oracle_difference"] = difference
        passed = passed and difference < settings.ORACLE_TOL
    if req.h_checks:
        report = check_h_properties(build_h(field_))
        out["h_checks"] = report.to_dict()
        passed = passed and report.passed
    if req.homogeneous:
        result = solve_homogeneous(cover, a)
        out["homogeneous"] = {"norm": result.norm, "smallest_singular_value": result.smallest_singular_value}
        passed = passed and result.norm < 1e-10
    out["pass"] = passed
    return out


def handle_theta(req: ThetaRequest) -> Dict[str, Any]:
    spec = ThetaSpec(tuple(parse_puncture(p) for p in req.punctures))
    return theta(spec).to_dict()


def handle_pfratio(req: PfratioRequest) -> Dict[str, Any]:
    return {"ratio": pfaffian_ratio(req.points, [parse_puncture(p) for p in req.punctures])}


def handle_converge(req: ConvergeRequest) -> Dict[str, Any]:
    spec = ConvergenceSpec(
        puncture=tuple(req.puncture),
        sizes=tuple(req.sizes),
        method=req.method,
        a_height=req.a_height,
        b_height=req.b_height,
        hm_grid=req.hm_grid,
    )
    rows = run_convergence(spec)
    path = Path(req.output) if req.output else None
    csv = rows_to_csv(rows, path, timing=req.timing)
    return {"csv": csv, "rows": [row.__dict__ for row in rows], "output": str(path) if path else None}


def handle_catalogue(req: CatalogueRequest) -> Dict[str, Any]:
    return run_catalogue(flip_eta=req.flip_eta, solver=req.solver).to_dict()


HANDLERS = {
    "validate": (ValidateRequest, handle_validate),
    "enumerate": (EnumerateRequest, handle_enumerate),
    "partition": (PartitionRequest, handle_partition),
    "obs": (ObservableRequest, handle_observable),
    "check": (CheckRequest, handle_check),
    "solve": (SolveRequest, handle_solve),
    "theta": (ThetaRequest, handle_theta),
    "pfratio": (PfratioRequest, handle_pfratio),
    "converge": (ConvergeRequest, handle_converge),
    "catalogue": (CatalogueRequest, handle_catalogue),
}


def subcommands() -> List[str]:
    return list(HANDLERS)
