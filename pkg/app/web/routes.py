import logging
from typing import Optional

from fastapi import APIRouter
from fastapi.responses import JSONResponse

from app.runtime.service import DescribeRequest, EncodeRequest, ErrorResponse, RuntimeService, StepRequest

logger = logging.getLogger(__name__)

router = APIRouter()

runtime_service: Optional[RuntimeService] = None


def _respond(service: Optional[RuntimeService], request) -> JSONResponse:
    if service is None:
        return JSONResponse({"error": "not_ready", "message": "Runtime not initialized"}, status_code=503)
    result = service.handle(request.model_dump())
    status = 400 if isinstance(result, ErrorResponse) else 200
    return JSONResponse(result.model_dump(), status_code=status)


@router.get("/health")
async def health():
    """Liveness plus what the server is running"""
    if runtime_service is None:
        return JSONResponse({"status": "starting"}, status_code=503)
    model = runtime_service.model
    return JSONResponse({
        "status": "ok",
        "model": type(model).__name__,
        "variables": [v.name for v in model.catalog.variables],
    })


@router.post("/encode")
async def encode(request: EncodeRequest):
    """Observation (or state) -> latent, decoded causal vector and state sentence"""
    return _respond(runtime_service, request)


@router.post("/step")
async def step(request: StepRequest):
    """One latent transition for an action sentence"""
    return _respond(runtime_service, request)


@router.post("/describe")
async def describe(request: DescribeRequest):
    return _respond(runtime_service, request)
