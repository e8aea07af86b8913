import logging
import math

from fastapi import APIRouter, HTTPException, status
from fastapi.responses import JSONResponse

from app.api.utils.responses import AllocationInputError, AllocationSaturationError, DomainRangeError
from app.core.models import ActuatorCommand, ControlDemand
from .schemas import AllocationRequestDTO, ReconstructRequestDTO, command_to_dict
from .service import allocate, allocation_round_trip, reconstruct_wrench


allocation_router = APIRouter(prefix="/allocation", tags=["Allocation"])


@allocation_router.post("/")
def allocate_demand(request: AllocationRequestDTO):
    demand = ControlDemand(
        tau_roll=request.tau_roll_Nm,
        tau_pitch=request.tau_pitch_Nm,
        tau_yaw=request.tau_yaw_Nm,
        T_col=request.T_col_N,
        chi=math.radians(request.chi_deg),
    )
    try:
        command = allocate(demand, request.vehicle.to_geometry(), request.actuators.to_allocation_limits(), request.strict)
    except (AllocationInputError, AllocationSaturationError, DomainRangeError) as e:
        logging.error(f"Allocation failed: {e.message}")
        raise HTTPException(status_code=e.status_code, detail=e.message)

    return JSONResponse(
        status_code=status.HTTP_200_OK,
        content={
            "message": "Saturated actuator command." if command.saturated else "Actuator command.",
            "command": command_to_dict(command),
        },
    )


@allocation_router.post("/reconstruct")
def reconstruct(request: ReconstructRequestDTO):
    chi = math.radians(request.chi_deg)
    command = ActuatorCommand(request.T_r_N, request.T_l_N, request.T_t_N, chi, math.radians(request.epsilon_deg))
    try:
        torque, collective = reconstruct_wrench(command, request.vehicle.to_geometry(), chi, request.tau_aero_scale_Nm)
    except DomainRangeError as e:
        raise HTTPException(status_code=e.status_code, detail=e.message)

    return JSONResponse(
        status_code=status.HTTP_200_OK,
        content={
            "message": "Wrench produced by the command.",
            "tau_roll_Nm": float(torque[0]),
            "tau_pitch_Nm": float(torque[1]),
            "tau_yaw_Nm": float(torque[2]),
            "T_col_N": float(collective),
        },
    )


@allocation_router.get("/check")
def round_trip_check(n_samples: int = 10_000, seed: int = 0):
    if n_samples <= 0:
        raise HTTPException(status_code=400, detail="n_samples must be positive.")
    report = allocation_round_trip(n_samples, seed)
    return JSONResponse(
        status_code=status.HTTP_200_OK,
        content={
            "message": "Allocation round trip passed." if report["passed"] else "Allocation round trip failed.",
            "report": report,
        },
    )
