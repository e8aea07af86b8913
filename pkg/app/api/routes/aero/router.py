import math

import numpy as np
from fastapi import APIRouter, HTTPException, status
from fastapi.responses import JSONResponse

from app.api.utils.responses import DomainRangeError
from app.core.models import AeroParams
from .schemas import PropWashRequestDTO, WrenchRequestDTO
from .service import default_layout, flow_velocity, parse_aero_params, prop_wash_correction, wrench_batch


aero_router = APIRouter(prefix="/aero", tags=["Aerodynamics"])


@aero_router.post("/wrench")
def wrench(request: WrenchRequestDTO):
    params = parse_aero_params(request.params) if request.params else AeroParams()
    geometry = request.vehicle.to_geometry()
    chi = math.radians(request.chi_deg)
    epsilon = math.radians(request.epsilon_deg)

    force, torque = wrench_batch(
        flow_velocity(request.flow_speed_mps, math.radians(request.flow_angle_deg)),
        np.radians(request.body_rates_dps),
        chi + epsilon,
        chi - epsilon,
        request.T_r_N,
        request.T_l_N,
        request.T_t_N,
        params,
        geometry,
        default_layout(geometry),
        include_propulsion=request.include_propulsion,
    )
    return JSONResponse(
        status_code=status.HTTP_200_OK,
        content={
            "message": "Body-frame wrench about the CoG.",
            "force_N": [float(v) for v in force[0]],
            "torque_Nm": [float(v) for v in torque[0]],
        },
    )


@aero_router.post("/prop-wash")
def prop_wash(request: PropWashRequestDTO):
    try:
        flow = prop_wash_correction(
            request.v_z_wing_mps,
            request.v_x_wing_mps,
            request.T_N,
            request.vehicle.to_geometry(),
            request.efficiency,
        )
    except DomainRangeError as e:
        raise HTTPException(status_code=e.status_code, detail=e.message)

    return JSONResponse(
        status_code=status.HTTP_200_OK,
        content={
            "message": "Slipstream-corrected local flow.",
            "v_z_wing_tot_mps": flow.v_z_wing_tot,
            "v_total_corrected_mps": flow.v_total_corrected,
            "alpha_effective_deg": math.degrees(flow.alpha_effective),
        },
    )
