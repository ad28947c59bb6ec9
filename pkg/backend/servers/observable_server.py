"""
Observable Server for the Ising spinor toolkit
"""

import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from backend.config.settings import settings
from backend.routers.observables import router as observables_router
from backend.utils.logging_config import configure_logging

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """
    Application lifespan manager
    """
    configure_logging()
    logger.info(f"Observable server starting on {settings.HOST}:{settings.PORT}")
    yield
    logger.info("Observable server stopped")


app = FastAPI(
    title="Ising Spinor Toolkit API",
    description="Exact and numerical spinor observables of the critical Ising model",
    version="1.0.0",
    docs_url="/docs",
    redoc_url="/redoc",
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.ALLOWED_ORIGINS.split(","),
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(observables_router, prefix="/api", tags=["observables"])


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    logger.error(f"Unhandled error on {request.url.path}: {str(exc)}")
    return JSONResponse(status_code=500, content={"error": type(exc).__name__, "message": str(exc)})


@app.get("/health")
async def health_check():
    """Health check endpoint"""
    return {
        "status": "healthy",
        "service": "observables",
        "version": "1.0.0",
    }


@app.get("/")
async def root():
    """Root endpoint"""
    return {
        "message": "Ising Spinor Toolkit API",
        "version": "1.0.0",
        "endpoints": {
            "docs": "/docs",
            "health": "/health",
            "api": "/api",
        },
    }


if __name__ == "__main__":
    import uvicorn
    uvicorn.run("backend.servers.observable_server:app", host=settings.HOST, port=settings.PORT, reload=settings.DEBUG)
