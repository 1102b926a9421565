"""
Glycan Structure Service - Main Application
"""
import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI

from glycocc import __version__
from glycocc.config import APP_NAME, configure_logging
from glycocc.routers import glycans
from glycocc.services.templates import template_library

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan - setup and teardown."""
    configure_logging()
    # Load and validate the template library before the first request
    template_library.names()
    logger.info("Loaded %d monosaccharide templates (version %s)", len(template_library.names()), template_library.version)

    yield

    logger.info("Shutting down %s", APP_NAME)


# Create FastAPI app
app = FastAPI(
    title="Glycan Structure Service",
    description="Parse glycans, assemble atom graphs and build combinatorial complexes",
    version=__version__,
    lifespan=lifespan,
)

app.include_router(glycans.router)


# Health check
@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {"status": "healthy", "service": APP_NAME}


if __name__ == "__main__":
    import uvicorn
    uvicorn.run("glycocc.main:app", host="0.0.0.0", port=8000, reload=True)
