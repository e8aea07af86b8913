import logging

from fastapi import APIRouter, HTTPException, status
from fastapi.responses import JSONResponse

from app.api.utils.responses import PlotNotSavedError, ScenarioFileError
from .schemas import ReportRequestDTO
from .service import generate_report


report_router = APIRouter(prefix="/reports", tags=["Reports"])


@report_router.post("/")
def create_report(request: ReportRequestDTO):
    try:
        report = generate_report(request.log_path, request.output_dir, request.cruise_airspeed_mps)
    except PlotNotSavedError as e:
        logging.error(f"Plot not saved: {e.message}")
        raise HTTPException(status_code=e.status_code, detail=e.message)
    except ScenarioFileError as e:
        raise HTTPException(status_code=e.status_code, detail=e.message)

    return JSONResponse(
        status_code=status.HTTP_201_CREATED,
        content={
            "message": "Your flight log is summarised in the plots.",
            "report": report,
        },
    )
