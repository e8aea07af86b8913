import logging

from fastapi import APIRouter, HTTPException, status
from fastapi.responses import JSONResponse

from app.api.utils.responses import DomainRangeError, ScenarioFileError, SimulationDivergenceError
from .schemas import ScenarioFile
from .service import level_flight_power_reduction, run_scenario


sim_router = APIRouter(prefix="/sim", tags=["Simulation"])


@sim_router.post("/run")
def run(scenario: ScenarioFile):
    try:
        log = run_scenario(scenario)
    except SimulationDivergenceError as e:
        logging.error(f"Scenario {scenario.name} diverged after {len(e.log or [])} ticks")
        raise HTTPException(status_code=e.status_code, detail=e.message)
    except ScenarioFileError as e:
        raise HTTPException(status_code=e.status_code, detail=e.message)

    return JSONResponse(
        status_code=status.HTTP_200_OK,
        content={
            "message": f"Scenario {scenario.name} finished.",
            "summary": log.summary,
        },
    )


@sim_router.get("/power-reduction")
def power_reduction(airspeed_mps: float = 10.0):
    try:
        report = level_flight_power_reduction(airspeed_mps)
    except DomainRangeError as e:
        raise HTTPException(status_code=e.status_code, detail=e.message)

    return JSONResponse(
        status_code=status.HTTP_200_OK,
        content={
            "message": f"Level flight at {airspeed_mps} m/s against hover.",
            "report": report,
        },
    )
