import math

from pydantic import BaseModel, field_validator

from app.api.utils.validation_errors import TiltAngleValidationError
from ..sim.schemas import ActuatorConfig, GeometryConfig


class AllocationRequestDTO(BaseModel):
    """Torques in the allocation convention: roll right-wing-down, pitch nose-up, yaw nose-right."""

    tau_roll_Nm: float = 0.0
    tau_pitch_Nm: float = 0.0
    tau_yaw_Nm: float = 0.0
    T_col_N: float
    chi_deg: float = 90.0
    strict: bool = False
    vehicle: GeometryConfig = GeometryConfig()
    actuators: ActuatorConfig = ActuatorConfig()

    @field_validator("chi_deg")
    def validate_chi(cls, v):
        if not math.isfinite(v) or not 0.0 < v <= 90.0:
            raise TiltAngleValidationError("chi_deg must lie in (0, 90].")
        return v


class ReconstructRequestDTO(BaseModel):
    T_r_N: float
    T_l_N: float
    T_t_N: float = 0.0
    chi_deg: float = 90.0
    epsilon_deg: float = 0.0
    vehicle: GeometryConfig = GeometryConfig()
    tau_aero_scale_Nm: float = 200.0

    @field_validator("chi_deg")
    def validate_chi(cls, v):
        if not math.isfinite(v) or not 0.0 < v <= 90.0:
            raise TiltAngleValidationError("chi_deg must lie in (0, 90].")
        return v


def command_to_dict(command) -> dict:
    return {
        "T_r_N": command.T_r,
        "T_l_N": command.T_l,
        "T_t_N": command.T_t,
        "chi_deg": math.degrees(command.chi),
        "epsilon_deg": math.degrees(command.epsilon),
        "zeta_r_deg": math.degrees(command.zeta_r),
        "zeta_l_deg": math.degrees(command.zeta_l),
        "main_clamped": bool(command.main_clamped),
        "tail_clamped": bool(command.tail_clamped),
        "epsilon_clamped": bool(command.epsilon_clamped),
        "denominator_floored": bool(command.denominator_floored),
    }
