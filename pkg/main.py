# main.py
import logging
import os
from fractions import Fraction
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from fastapi import Depends, FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, ValidationError

from src.adversary import SECONDS_PER_YEAR, predicted_mtbf
from src.channel import max_tolerated_burst, run
from src.config import Scenario, Settings, load_settings, parse_strategy, scenario_dump, strategy_label
from src.errors import InvalidArgument
from src.report import render_fraction
from src.transmitter import theoretical_efficiency
from src.wire import frame_to_dict, golden_vectors

load_dotenv()
logging.basicConfig(level=getattr(logging, os.getenv("TRUDI_LOG", "WARNING").upper(), logging.WARNING))
logger = logging.getLogger(__name__)

app = FastAPI(title="TRUDI Simulation API", version="1.0.0")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["http://localhost:3000", "http://localhost:5173"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

_settings: Optional[Settings] = None


def get_settings() -> Settings:
    global _settings
    if _settings is None:
        _settings = load_settings()
    return _settings


# Pydantic models
class RationalValue(BaseModel):
    decimal: float
    exact: str


class EfficiencyRequest(BaseModel):
    strategy: Dict[str, Any]


class EfficiencyResponse(BaseModel):
    strategy: str
    eta_kt: RationalValue
    period_frames: int
    keys_per_period: int
    max_tolerated_burst: int


class MtbfResponse(BaseModel):
    hash_rate: RationalValue
    key_bits: int
    mtbf_seconds: RationalValue
    mtbf_years: RationalValue


class SimulateResponse(BaseModel):
    scenario: Dict[str, Any]
    metrics: Dict[str, Any]


class ServiceStatus(BaseModel):
    api_ready: bool
    key_bits: int
    hash_algorithm: str
    period_us: int
    max_frames: int


@app.get("/")
async def root():
    return {"message": "TRUDI Simulation API"}


@app.get("/status", response_model=ServiceStatus)
async def get_status(settings: Settings = Depends(get_settings)):
    """Defaults the service runs with"""
    return ServiceStatus(
        api_ready=True,
        key_bits=settings.hash.key_bits,
        hash_algorithm=settings.hash.algorithm,
        period_us=settings.timing.period_us,
        max_frames=settings.service_max_frames,
    )


@app.post("/efficiency", response_model=EfficiencyResponse)
async def efficiency(request: EfficiencyRequest):
    """Closed-form key transmission efficiency of one strategy"""
    try:
        config = parse_strategy(request.strategy)
    except InvalidArgument as e:
        raise HTTPException(status_code=422, detail=str(e))
    return EfficiencyResponse(
        strategy=strategy_label(config),
        eta_kt=render_fraction(theoretical_efficiency(config)),
        period_frames=config.period_frames,
        keys_per_period=config.keys_per_period,
        max_tolerated_burst=max_tolerated_burst(config),
    )


@app.get("/mtbf", response_model=MtbfResponse)
async def mtbf(rate: str, bits: int = Query(..., ge=8, le=256)):
    try:
        hash_rate = Fraction(rate)
        seconds = predicted_mtbf(hash_rate, bits)
    except (ValueError, ZeroDivisionError) as e:
        raise HTTPException(status_code=400, detail=f"Bad rate or key width: {e}")
    return MtbfResponse(
        hash_rate=render_fraction(hash_rate),
        key_bits=bits,
        mtbf_seconds=render_fraction(seconds),
        mtbf_years=render_fraction(seconds / SECONDS_PER_YEAR),
    )


@app.post("/simulate", response_model=SimulateResponse)
async def simulate(body: Dict[str, Any], settings: Settings = Depends(get_settings)):
    """Run one scenario given as JSON"""
    try:
        scenario = Scenario.model_validate(body)
    except ValidationError as e:
        raise HTTPException(status_code=422, detail=e.errors(include_url=False, include_context=False))

    if scenario.frame_count > settings.service_max_frames:
        raise HTTPException(
            status_code=400,
            detail=f"frame_count {scenario.frame_count} exceeds the service limit of {settings.service_max_frames}",
        )

    try:
        metrics = run(scenario)
    except InvalidArgument as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.exception("Simulation failed")
        raise HTTPException(status_code=500, detail=f"Simulation failed: {str(e)}")

    return SimulateResponse(scenario=scenario_dump(scenario), metrics=metrics.to_dict())


@app.get("/vectors")
async def vectors() -> List[Dict[str, Any]]:
    """Golden frame encodings"""
    return [
        {
            "name": v["name"],
            "key_bytes": v["key_bytes"],
            "frame": frame_to_dict(v["frame"]),
            "encoded": v["encoded"],
        }
        for v in golden_vectors()
    ]


if __name__ == "__main__":
    import uvicorn
    uvicorn.run("main:app", host="0.0.0.0", port=8000, reload=True)
