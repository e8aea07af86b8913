import math
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, field_validator

from app.api.utils.validation_errors import GridValidationError
from app.core.models import AeroParams


class SweepGrid(BaseModel):
    """Tunnel sweep grid. Samples = speeds x angles x chi x epsilon; thrust levels cycle over samples."""

    flow_speeds_mps: list[float] = [float(v) for v in np.linspace(0.0, 14.0, 10)]
    flow_angles_deg: list[float] = [float(v) for v in np.linspace(-90.0, 90.0, 10)]
    chi_deg: list[float] = [15.0, 30.0, 45.0, 60.0, 90.0]
    epsilon_deg: list[float] = [-3.0, 0.0, 3.0]
    rotor_thrust_levels_N: list[float] = [2.0, 6.0, 10.0]
    tail_thrust_levels_N: list[float] = [-4.0, 0.0, 4.0]

    @field_validator("flow_speeds_mps")
    def validate_speeds(cls, v):
        if not v or any((not math.isfinite(s)) or s < 0.0 for s in v):
            raise GridValidationError("Flow speeds must be a non-empty list of values >= 0.")
        return v

    @field_validator("flow_angles_deg", "chi_deg", "epsilon_deg", "rotor_thrust_levels_N", "tail_thrust_levels_N")
    def validate_values(cls, v, info):
        if not v or not all(math.isfinite(a) for a in v):
            raise GridValidationError(f"{info.field_name} must be a non-empty list of finite values.")
        return v

    @field_validator("chi_deg")
    def validate_chi(cls, v):
        if any(c <= 0.0 or c > 90.0 for c in v):
            raise GridValidationError("chi_deg values must lie in (0, 90].")
        return v

    @field_validator("rotor_thrust_levels_N")
    def validate_thrust(cls, v):
        if any(t < 0.0 for t in v):
            raise GridValidationError("Rotor thrust levels must be >= 0.")
        return v

    @property
    def size(self) -> int:
        return len(self.flow_speeds_mps) * len(self.flow_angles_deg) * len(self.chi_deg) * len(self.epsilon_deg)


class NoiseSpec(BaseModel):
    relative: float = 0.0
    absolute_force_N: float = 0.0
    absolute_torque_Nm: float = 0.0

    @field_validator("relative", "absolute_force_N", "absolute_torque_Nm")
    def validate_noise(cls, v, info):
        if not math.isfinite(v) or v < 0.0:
            raise GridValidationError(f"{info.field_name} must be >= 0.")
        return v


class FitOptions(BaseModel):
    max_iterations: int = 500
    gradient_tolerance: float = 1e-8
    step_tolerance: float = 1e-10
    # accepted gradient cosine for fits stopped by the step criterion
    gradient_check: float = 1e-4
    fd_step: float = 1e-6
    initial_damping: float = 1e-3
    force_std_N: float = 0.1
    torque_std_Nm: float = 0.01
    column_norm_tolerance: float = 1e-8
    identifiability_threshold: float = 0.02
    frozen: list[str] = []
    target_roll_slope: float | None = None
    target_weight: float = 10.0
    target_airspeed_mps: float = 10.0
    target_chi_deg: float = 15.0
    target_thrust_N: float = 8.0

    @field_validator("max_iterations")
    def validate_iterations(cls, v):
        if v < 0:
            raise GridValidationError("max_iterations must be >= 0.")
        return v

    @field_validator("fd_step", "force_std_N", "torque_std_Nm", "initial_damping")
    def validate_positive(cls, v, info):
        if not math.isfinite(v) or v <= 0.0:
            raise GridValidationError(f"{info.field_name} must be positive.")
        return v

    @field_validator("frozen")
    def validate_frozen(cls, v):
        unknown = [name for name in v if name not in AeroParams.names()]
        if unknown:
            raise GridValidationError(f"Unknown parameter names: {unknown}")
        return v


@dataclass
class FitResult:
    params: AeroParams
    residual_rms: dict[str, float]
    covariance: np.ndarray
    std_errors: dict[str, float]
    iterations: int
    converged: bool
    stop_reason: str
    gradient_norm: float
    cost_history: list[float] = field(default_factory=list)
    frozen: list[str] = field(default_factory=list)
    identifiable: list[str] = field(default_factory=list)
    roll_slope: float | None = None

    def summary(self) -> dict:
        return {
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "final_cost": self.cost_history[-1] if self.cost_history else None,
            "residual_rms": self.residual_rms,
            "frozen": self.frozen,
            "identifiable": self.identifiable,
            "std_errors": self.std_errors,
            "roll_slope_Nm_per_deg": self.roll_slope,
            "params": self.params.to_dict(),
        }


class SynthRequestDTO(BaseModel):
    grid: SweepGrid = SweepGrid()
    noise: NoiseSpec = NoiseSpec()
    seed: int = 0


class FitRequestDTO(BaseModel):
    samples: list[dict[str, float]]
    initial: dict[str, float] = {}
    options: FitOptions = FitOptions()
