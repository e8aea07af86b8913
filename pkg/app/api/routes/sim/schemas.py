import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, field_validator, model_validator

from app.api.routes.controller.schemas import AltitudeGains, AttitudeGains
from app.api.utils.validation_errors import GeometryValidationError, TiltAngleValidationError, TimelineValidationError
from app.core.models import ActuatorLimits, AllocationLimits, VehicleGeometry

CONTROL_PERIOD_S = 0.005


class GeometryConfig(BaseModel):
    b_m: float = 0.75
    l_m: float = 0.55
    x_offset_m: float = 0.0
    y_offset_m: float = 0.0
    z_offset_m: float = 0.0
    mass_kg: float = 5.0
    g_mps2: float = 9.81
    prop_diameter_m: float = 0.53
    rho_kgpm3: float = 1.225
    wingspan_m: float = 1.5
    chord_m: float = 0.26
    chi_min_deg: float = 10.0
    inertia_kgm2: tuple[float, float, float] = (0.40, 0.25, 0.60)
    tail_prop_diameter_m: float = 0.20
    nacelle_width_m: float = 0.12

    @field_validator("b_m", "l_m", "mass_kg", "g_mps2", "prop_diameter_m", "rho_kgpm3", "wingspan_m", "chord_m", "tail_prop_diameter_m")
    def validate_positive(cls, v, info):
        if not math.isfinite(v) or v <= 0.0:
            raise GeometryValidationError(f"{info.field_name} must be positive.")
        return v

    @field_validator("chi_min_deg")
    def validate_chi_min(cls, v):
        if not 0.0 < v < 90.0:
            raise GeometryValidationError("chi_min_deg must lie in (0, 90).")
        return v

    def to_geometry(self) -> VehicleGeometry:
        return VehicleGeometry(
            b=self.b_m,
            l=self.l_m,
            x_offset=self.x_offset_m,
            y_offset=self.y_offset_m,
            z_offset=self.z_offset_m,
            m=self.mass_kg,
            g=self.g_mps2,
            D=self.prop_diameter_m,
            rho=self.rho_kgpm3,
            wingspan=self.wingspan_m,
            chord=self.chord_m,
            chi_min=math.radians(self.chi_min_deg),
            inertia=tuple(float(i) for i in self.inertia_kgm2),
            tail_D=self.tail_prop_diameter_m,
            nacelle_width=self.nacelle_width_m,
        )


class ActuatorConfig(BaseModel):
    tau_rotor_s: float = 0.05
    servo_rate_dps: float = 120.0
    T_max_N: float = 30.0
    T_t_max_N: float = 8.0
    epsilon_max_deg: float = 30.0
    denominator_floor_Nm: float = 0.5
    tau_aero_scale_Nm: float = 200.0

    @field_validator("tau_rotor_s", "servo_rate_dps", "T_max_N", "T_t_max_N", "epsilon_max_deg", "denominator_floor_Nm")
    def validate_positive(cls, v, info):
        if not math.isfinite(v) or v <= 0.0:
            raise GeometryValidationError(f"{info.field_name} must be positive.")
        return v

    def to_actuator_limits(self) -> ActuatorLimits:
        return ActuatorLimits(
            tau_rotor=self.tau_rotor_s,
            servo_rate=math.radians(self.servo_rate_dps),
            T_max=self.T_max_N,
            T_t_max=self.T_t_max_N,
        )

    def to_allocation_limits(self) -> AllocationLimits:
        return AllocationLimits(
            T_max=self.T_max_N,
            T_t_max=self.T_t_max_N,
            epsilon_max=math.radians(self.epsilon_max_deg),
            denominator_floor=self.denominator_floor_Nm,
            tau_aero_scale=self.tau_aero_scale_Nm,
        )


class PowerConfig(BaseModel):
    """Momentum-theory rotor power: P = T^1.5 / sqrt(2 rho A) / eta + k_profile * T."""

    eta_prop: float = 0.9
    k_profile_WpN: float = 0.2

    @field_validator("eta_prop")
    def validate_eta(cls, v):
        if not 0.0 < v <= 1.0:
            raise GeometryValidationError("eta_prop must lie in (0, 1].")
        return v


class WindConfig(BaseModel):
    """Constant inertial wind plus an optional 1-cos gust."""

    constant_mps: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gust_mps: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gust_start_s: float = 0.0
    gust_duration_s: float = 0.0

    def at(self, t: float) -> np.ndarray:
        wind = np.array(self.constant_mps, dtype=float)
        if self.gust_duration_s > 0.0 and self.gust_start_s <= t <= self.gust_start_s + self.gust_duration_s:
            phase = (t - self.gust_start_s) / self.gust_duration_s
            wind = wind + 0.5 * (1.0 - math.cos(2.0 * math.pi * phase)) * np.array(self.gust_mps, dtype=float)
        return wind


class SensorNoise(BaseModel):
    gyro_std_rps: float = 0.0
    attitude_std_rad: float = 0.0
    position_std_m: float = 0.0
    velocity_std_mps: float = 0.0

    @property
    def enabled(self) -> bool:
        return any(v > 0.0 for v in (self.gyro_std_rps, self.attitude_std_rad, self.position_std_m, self.velocity_std_mps))


class InitialConditions(BaseModel):
    position_m: tuple[float, float, float] = (0.0, 0.0, 10.0)
    velocity_mps: tuple[float, float, float] = (0.0, 0.0, 0.0)
    roll_deg: float = 0.0
    pitch_deg: float = 0.0
    yaw_deg: float = 0.0
    body_rates_dps: tuple[float, float, float] = (0.0, 0.0, 0.0)


class TimelinePoint(BaseModel):
    t_s: float
    chi_deg: float = 90.0
    roll_deg: float = 0.0
    pitch_deg: float = 0.0
    yaw_deg: float = 0.0
    a_z_mps2: float = 0.0
    yaw_rate_ff_dps: float = 0.0


class SimConfig(BaseModel):
    dt_physics_s: float = 0.001
    dt_control_s: float = CONTROL_PERIOD_S
    integrator: Literal["rk4", "euler"] = "rk4"
    # "step" holds the external wrench over a physics step, "stage" re-evaluates it at every RK4 stage
    wrench_hold: Literal["step", "stage"] = "step"
    duration_s: float = 10.0
    seed: int = 0
    wind: WindConfig = WindConfig()
    noise: SensorNoise = SensorNoise()
    initial: InitialConditions = InitialConditions()
    timeline: list[TimelinePoint] = [TimelinePoint(t_s=0.0)]

    @field_validator("dt_physics_s", "duration_s")
    def validate_positive(cls, v, info):
        if not math.isfinite(v) or v <= 0.0:
            raise TimelineValidationError(f"{info.field_name} must be positive.")
        return v

    @field_validator("dt_control_s")
    def validate_control_period(cls, v):
        if abs(v - CONTROL_PERIOD_S) > 1e-12:
            raise TimelineValidationError("dt_control_s is fixed at 0.005 s (200 Hz).")
        return v

    @field_validator("timeline")
    def validate_timeline(cls, v):
        if not v:
            raise TimelineValidationError("Timeline needs at least one point.")
        times = [p.t_s for p in v]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise TimelineValidationError("Timeline times must be strictly increasing.")
        return v

    @model_validator(mode="after")
    def validate_steps(self):
        if self.dt_physics_s > self.dt_control_s:
            raise TimelineValidationError("dt_physics_s must not exceed dt_control_s.")
        ratio = self.dt_control_s / self.dt_physics_s
        if abs(ratio - round(ratio)) > 1e-9:
            raise TimelineValidationError("dt_control_s must be an integer multiple of dt_physics_s.")
        return self

    @property
    def substeps(self) -> int:
        return int(round(self.dt_control_s / self.dt_physics_s))


class ScenarioFile(BaseModel):
    name: str = "scenario"
    vehicle: GeometryConfig = GeometryConfig()
    gains: AttitudeGains = AttitudeGains()
    altitude: AltitudeGains = AltitudeGains()
    actuators: ActuatorConfig = ActuatorConfig()
    power: PowerConfig = PowerConfig()
    aero_params_file: str | None = None
    thrust_ff_coefficients: tuple[float, float, float, float, float, float, float, float] | None = None
    sim: SimConfig = SimConfig()

    @model_validator(mode="after")
    def validate_chi_commands(self):
        for point in self.sim.timeline:
            if not self.vehicle.chi_min_deg <= point.chi_deg <= 90.0:
                raise TiltAngleValidationError(
                    f"chi_deg={point.chi_deg} at t={point.t_s} s outside [{self.vehicle.chi_min_deg}, 90]."
                )
        return self
