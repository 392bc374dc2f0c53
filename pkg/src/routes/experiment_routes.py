# src/routes/experiment_routes.py
from datetime import datetime, timezone
from typing import List

from fastapi import APIRouter, HTTPException
from fastapi.concurrency import run_in_threadpool

from src.config import settings
from src.errors import (
    CapabilityError, ConfigurationError, DomainError, OutputPathError, SimulationError,
)
from src.experiment import apply_overrides, run_experiment, validate_experiment
from src.logger_config import logger
from src.models import (
    AggregateReport, ExperimentConfig, PresetInfo, RunRequest, ValidationReport,
)
from src.presets import PRESETS, get_preset, list_presets

router = APIRouter(prefix="/sim", tags=["Simulation"])


def _to_http(error: SimulationError) -> HTTPException:
    """Map simulator errors onto status codes"""
    if isinstance(error, (ConfigurationError, DomainError)):
        detail = {"message": str(error)}
        if isinstance(error, ConfigurationError) and error.errors:
            detail["errors"] = [
                {"loc": list(e.get("loc", ())), "msg": e.get("msg", "")} for e in error.errors
            ]
        return HTTPException(status_code=422, detail=detail)
    if isinstance(error, CapabilityError):
        return HTTPException(status_code=413, detail=str(error))
    if isinstance(error, OutputPathError):
        return HTTPException(status_code=500, detail=str(error))
    return HTTPException(status_code=500, detail="Internal server error")


# ==================== Presets ====================

@router.get("/presets", response_model=List[PresetInfo])
async def get_presets():
    """Embedded experiments"""
    return list_presets()


@router.get("/presets/{name}", response_model=ExperimentConfig)
async def get_preset_config(name: str):
    """Full configuration of one preset"""
    if name not in PRESETS:
        raise HTTPException(
            status_code=404,
            detail=f"Unknown preset '{name}'; available presets: {', '.join(PRESETS)}",
        )
    return get_preset(name)


# ==================== Experiments ====================

@router.post("/validate", response_model=ValidationReport)
async def validate(config: ExperimentConfig):
    """Check an experiment and report the queue bounds for each V"""
    try:
        return validate_experiment(config)
    except SimulationError as e:
        logger.error(f"Validation failed: {e}")
        raise _to_http(e)


@router.post("/run", response_model=AggregateReport)
async def run(request: RunRequest):
    """Run an experiment; files are only written when write_csv is set"""
    if request.preset is not None and request.preset not in PRESETS:
        raise HTTPException(
            status_code=404,
            detail=f"Unknown preset '{request.preset}'; available presets: {', '.join(PRESETS)}",
        )
    try:
        config = get_preset(request.preset) if request.preset is not None else request.config
        config = apply_overrides(
            config,
            v_values=request.v_values,
            horizon=request.horizon,
            replications=request.replications,
            seed=request.seed,
        )
        logger.info(f"Run requested: preset={config.name}, horizon={config.horizon}")
        return await run_in_threadpool(run_experiment, config, None, request.write_csv)
    except SimulationError as e:
        logger.error(f"Run failed: {e}")
        raise _to_http(e)


@router.get("/health")
async def health_check():
    return {
        "status": "healthy",
        "service": "cmvno_sim",
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "presets": len(PRESETS),
        "max_workers": settings.max_workers,
    }
