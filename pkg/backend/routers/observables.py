"""
Observable router: HTTP access to the toolkit's request handlers
"""

import logging
from typing import Any, Dict

from fastapi import APIRouter, HTTPException
from fastapi.concurrency import run_in_threadpool

from backend.schemas.schemas import (
    CatalogueRequest,
    CheckRequest,
    ObservableRequest,
    PartitionRequest,
    PfratioRequest,
    PfratioResponse,
    ReportResponse,
    ThetaRequest,
    ThetaResponse,
    ValidateRequest,
    ValidateResponse,
)
from backend.services.toolkit_service import (
    handle_catalogue,
    handle_check,
    handle_observable,
    handle_partition,
    handle_pfratio,
    handle_theta,
    handle_validate,
)
from backend.utils.errors import ToolkitError

logger = logging.getLogger(__name__)
router = APIRouter()


async def _run(handler, request) -> Dict[str, Any]:
    try:
        return await run_in_threadpool(handler, request)
    except ToolkitError as e:
        logger.error(f"{handler.__name__} failed: {str(e)}")
        status = 400 if e.exit_code == 2 else 422
        raise HTTPException(status_code=status, detail=e.to_dict())


@router.post("/validate", response_model=ValidateResponse)
async def validate_domain(request: ValidateRequest):
    """Check domain axioms"""
    return await _run(handle_validate, request)


@router.post("/theta", response_model=ThetaResponse, response_model_by_alias=True)
async def theta(request: ThetaRequest):
    """Continuum ratio for punctures in the upper half-plane"""
    return await _run(handle_theta, request)


@router.post("/pfratio", response_model=PfratioResponse)
async def pfratio(request: PfratioRequest):
    """Continuum Pfaffian ratio"""
    return await _run(handle_pfratio, request)


@router.post("/partition")
async def partition(request: PartitionRequest):
    """Exact partition function and spin expectations"""
    return await _run(handle_partition, request)


@router.post("/observable")
async def observable(request: ObservableRequest):
    """Exact spinor observable values"""
    return await _run(handle_observable, request)


@router.post("/check", response_model=ReportResponse, response_model_by_alias=True)
async def check(request: CheckRequest):
    """Exact identity suite on one domain"""
    return await _run(handle_check, request)


@router.get("/catalogue")
async def catalogue(solver: bool = True):
    """Identity suite over the fixed catalogue"""
    return await _run(handle_catalogue, CatalogueRequest(solver=solver))
