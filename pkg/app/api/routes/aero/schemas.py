import math

from pydantic import BaseModel, field_validator

from app.api.utils.validation_errors import AeroParamsValidationError
from ..sim.schemas import GeometryConfig


class WrenchRequestDTO(BaseModel):
    """Tunnel-style condition: flow hitting the vehicle at flow_angle_deg (positive from below)."""

    flow_speed_mps: float = 0.0
    flow_angle_deg: float = 0.0
    chi_deg: float = 90.0
    epsilon_deg: float = 0.0
    T_r_N: float = 0.0
    T_l_N: float = 0.0
    T_t_N: float = 0.0
    body_rates_dps: tuple[float, float, float] = (0.0, 0.0, 0.0)
    include_propulsion: bool = True
    params: dict[str, float] = {}
    vehicle: GeometryConfig = GeometryConfig()

    @field_validator("flow_speed_mps")
    def validate_speed(cls, v):
        if not math.isfinite(v) or v < 0.0:
            raise AeroParamsValidationError("flow_speed_mps must be >= 0.")
        return v

    @field_validator("T_r_N", "T_l_N")
    def validate_thrust(cls, v, info):
        if not math.isfinite(v) or v < 0.0:
            raise AeroParamsValidationError(f"{info.field_name} must be >= 0.")
        return v


class PropWashRequestDTO(BaseModel):
    v_z_wing_mps: float
    v_x_wing_mps: float
    T_N: float
    efficiency: float = 1.0
    vehicle: GeometryConfig = GeometryConfig()

    @field_validator("efficiency")
    def validate_efficiency(cls, v):
        if not math.isfinite(v) or v < 0.0:
            raise AeroParamsValidationError("efficiency must be >= 0.")
        return v
