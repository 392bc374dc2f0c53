# app.py
from fastapi import FastAPI
from contextlib import asynccontextmanager

from src.routes.experiment_routes import router as sim_router
from src.config import settings
from src.logger_config import logger

# Lifespan manager for startup and shutdown events
@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info("Starting C-MVNO Simulation Service...")
    logger.info(f"Results directory: {settings.output_dir}, workers: {settings.max_workers}")

    yield

    logger.info("C-MVNO Simulation Service shutdown complete")

# Create FastAPI app
app = FastAPI(
    title="C-MVNO Simulation Service",
    description="Profit-maximizing control of a cognitive virtual network operator: sensing, leasing, pricing and power",
    version="1.0.0",
    lifespan=lifespan
)

# Include routers
app.include_router(sim_router)

# Root endpoint
@app.get("/")
async def root():
    return {
        "service": "C-MVNO Simulation Service",
        "version": "1.0.0",
        "status": "running",
        "docs": "/docs",
        "presets": "/sim/presets"
    }

# Health check endpoint
@app.get("/health")
async def health_check():
    return {
        "status": "healthy",
        "service": "cmvno_sim"
    }

if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "app:app",
        host=settings.host,
        port=settings.port,
        reload=settings.debug,
        log_level="info"
    )
