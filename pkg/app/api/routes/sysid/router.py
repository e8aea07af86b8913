import logging
import math

import numpy as np
import pandas as pd
from fastapi import APIRouter, HTTPException, status
from fastapi.responses import JSONResponse

from app.api.routes.aero.service import parse_aero_params
from app.api.utils.responses import DomainRangeError, FitNotConvergedError
from app.core.models import AeroParams, VehicleGeometry
from .schemas import FitRequestDTO, SynthRequestDTO
from .service import fit, generate_synthetic_sweep, sweep_from_frame, sweep_to_frame, trim_sweep


sysid_router = APIRouter(prefix="/sysid", tags=["System identification"])


@sysid_router.post("/synth")
def synthesize(request: SynthRequestDTO):
    data = generate_synthetic_sweep(AeroParams(), request.grid, request.noise, request.seed)
    return JSONResponse(
        status_code=status.HTTP_201_CREATED,
        content={
            "message": f"Synthetic sweep with {len(data)} samples.",
            "samples": sweep_to_frame(data).to_dict(orient="records"),
        },
    )


@sysid_router.post("/fit")
def fit_sweep(request: FitRequestDTO):
    initial = parse_aero_params(request.initial) if request.initial else AeroParams()
    try:
        data = sweep_from_frame(pd.DataFrame(request.samples), "Request samples")
        result = fit(initial, data, request.options)
        if not result.converged:
            raise FitNotConvergedError(
                f"Fit stopped by {result.stop_reason} after {result.iterations} iterations without converging.",
                result=result,
            )
    except DomainRangeError as e:
        raise HTTPException(status_code=e.status_code, detail=e.message)
    except FitNotConvergedError as e:
        logging.error(e.message)
        raise HTTPException(status_code=e.status_code, detail=e.message)

    return JSONResponse(
        status_code=status.HTTP_200_OK,
        content={
            "message": f"Fit converged after {result.iterations} iterations.",
            "result": result.summary(),
        },
    )


@sysid_router.get("/trim")
def trim(points: int = 33):
    geometry = VehicleGeometry()
    if points < 2:
        raise HTTPException(status_code=400, detail="points must be at least 2.")
    sweep = trim_sweep(np.linspace(geometry.chi_min, 0.5 * math.pi, points), AeroParams(), geometry)
    return JSONResponse(
        status_code=status.HTTP_200_OK,
        content={
            "message": f"Level-flight trim at {len(sweep)} tilt angles.",
            "trim": [
                {"chi_deg": math.degrees(chi), "airspeed_mps": v, "T_sum_N": T_sum, "T_col_N": T_col}
                for chi, v, T_sum, T_col in sweep.tolist()
            ],
        },
    )
