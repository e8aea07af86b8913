import math

from pydantic import BaseModel, field_validator

from app.api.utils.validation_errors import GainsValidationError


def _triple(name: str, value, non_negative: bool):
    if len(value) != 3:
        raise GainsValidationError(f"{name} needs exactly three entries (x, y, z).")
    if not all(math.isfinite(v) for v in value):
        raise GainsValidationError(f"{name} entries must be finite.")
    if non_negative and any(v < 0.0 for v in value):
        raise GainsValidationError(f"{name} entries must be >= 0.")
    return tuple(float(v) for v in value)


class AttitudeGains(BaseModel):
    """Attitude P and inertia-normalized rate PID gains, body axes (x, y, z).

    Tuned on the roll-step and transition scenarios in scenarios/.
    """

    k_P: tuple[float, float, float] = (6.0, 6.0, 3.0)
    k_P_rate: tuple[float, float, float] = (8.0, 8.0, 4.0)
    k_I_rate: tuple[float, float, float] = (2.0, 2.0, 1.0)
    k_D_rate: tuple[float, float, float] = (0.02, 0.02, 0.0)
    tau_trim_roll: float = 0.0
    yaw_rate_ff: float = 0.0
    integral_limit: tuple[float, float, float] = (2.5, 1.3, 1.5)
    omega_dot_cutoff_hz: float = 30.0

    @field_validator("k_P", "k_P_rate")
    def validate_proportional(cls, v, info):
        return _triple(info.field_name, v, non_negative=True)

    @field_validator("k_I_rate", "k_D_rate")
    def validate_finite(cls, v, info):
        return _triple(info.field_name, v, non_negative=False)

    @field_validator("integral_limit")
    def validate_integral_limit(cls, v, info):
        return _triple(info.field_name, v, non_negative=True)

    @field_validator("tau_trim_roll", "yaw_rate_ff")
    def validate_scalar(cls, v, info):
        if not math.isfinite(v):
            raise GainsValidationError(f"{info.field_name} must be finite.")
        return v

    @field_validator("omega_dot_cutoff_hz")
    def validate_cutoff(cls, v):
        if not math.isfinite(v) or v <= 0.0:
            raise GainsValidationError("omega_dot_cutoff_hz must be positive.")
        return v


class AltitudeGains(BaseModel):
    """Altitude hold producing the downward-positive a_z fed to the collective thrust."""

    enabled: bool = True
    k_z: float = 1.0
    k_vz: float = 3.0
    k_iz: float = 0.2
    integral_limit: float = 3.0

    @field_validator("k_z", "k_vz", "k_iz", "integral_limit")
    def validate_gain(cls, v, info):
        if not math.isfinite(v) or v < 0.0:
            raise GainsValidationError(f"{info.field_name} must be finite and >= 0.")
        return v


class AttitudeRequestDTO(BaseModel):
    q_current: tuple[float, float, float, float]
    q_desired: tuple[float, float, float, float]
    yaw_rate_ff: float = 0.0
    gains: AttitudeGains = AttitudeGains()
