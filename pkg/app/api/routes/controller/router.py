from fastapi import APIRouter, status
from fastapi.responses import JSONResponse

from app.core.mathcore import quat_normalize
from app.core.models import Quaternion
from .schemas import AttitudeRequestDTO
from .service import attitude_error, attitude_law


controller_router = APIRouter(prefix="/controller", tags=["Controller"])


@controller_router.post("/attitude")
def attitude(request: AttitudeRequestDTO):
    q_current = quat_normalize(Quaternion(*request.q_current))
    q_desired = quat_normalize(Quaternion(*request.q_desired))

    q_error = attitude_error(q_current, q_desired)
    omega_sp = attitude_law(q_error, request.gains, request.yaw_rate_ff)

    return JSONResponse(
        status_code=status.HTTP_200_OK,
        content={
            "message": "Attitude error and body-rate setpoint.",
            "q_error": [q_error.w, q_error.x, q_error.y, q_error.z],
            "omega_sp_rps": [float(v) for v in omega_sp],
        },
    )
