import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI

import app.web.routes as routes_module
from app import __version__
from app.runtime.service import RuntimeService
from app.web.routes import router

logger = logging.getLogger(__name__)


def create_app(service: RuntimeService) -> FastAPI:
    """FastAPI app serving the runtime protocol over HTTP"""

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        logger.info(f"Starting world-model runtime ({type(service.model).__name__})...")
        routes_module.runtime_service = service
        yield
        routes_module.runtime_service = None
        logger.info("Shutdown complete")

    app = FastAPI(
        title="Causal World Model Runtime",
        description="Encode observations, step actions in latent space, describe states",
        version=__version__,
        lifespan=lifespan,
    )
    app.include_router(router)
    return app
