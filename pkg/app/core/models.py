import math
from dataclasses import dataclass, field, fields, replace
import numpy as np

from app.api.utils.responses import DomainRangeError


@dataclass(frozen=True)
class Quaternion:
    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, arr) -> "Quaternion":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]))

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def norm(self) -> float:
        return math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class VehicleGeometry:
    """Airframe dimensions measured from the allocation origin S.

    Defaults describe a desk-scale airframe (1.5 m x 0.26 m wing, rotors at the
    wing tips). Only wingspan and chord are taken from a real vehicle; the rest
    are plausible config values.
    """

    b: float = 0.75
    l: float = 0.55
    x_offset: float = 0.0
    y_offset: float = 0.0
    z_offset: float = 0.0
    m: float = 5.0
    g: float = 9.81
    D: float = 0.53
    rho: float = 1.225
    wingspan: float = 1.5
    chord: float = 0.26
    chi_min: float = math.radians(10.0)
    inertia: tuple[float, float, float] = (0.40, 0.25, 0.60)
    tail_D: float = 0.20
    nacelle_width: float = 0.12

    def __post_init__(self):
        for name in ("b", "l", "m", "D", "rho", "g", "wingspan", "chord", "tail_D"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise DomainRangeError(f"Geometry field '{name}' must be positive, got {value}.")
        if not 0.0 < self.chi_min < 0.5 * math.pi:
            raise DomainRangeError(f"chi_min must lie in (0, pi/2), got {self.chi_min}.")
        if any(i <= 0.0 for i in self.inertia):
            raise DomainRangeError("Principal inertia values must be positive.")
        if not 0.0 <= self.nacelle_width < 0.5 * self.wingspan:
            raise DomainRangeError("Nacelle width must fit inside the half-wing.")

    @property
    def inertia_matrix(self) -> np.ndarray:
        return np.diag(self.inertia)

    @property
    def weight(self) -> float:
        return self.m * self.g

    @property
    def disc_area(self) -> float:
        return math.pi * self.D * self.D / 4.0

    @property
    def tail_disc_area(self) -> float:
        return math.pi * self.tail_D * self.tail_D / 4.0


@dataclass(frozen=True, eq=False)
class RigidBodyState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attitude: Quaternion = field(default_factory=Quaternion)
    body_rates: np.ndarray = field(default_factory=lambda: np.zeros(3))
    inertia: np.ndarray = field(default_factory=lambda: np.diag(VehicleGeometry().inertia))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity, self.attitude.as_array(), self.body_rates])

    @classmethod
    def from_vector(cls, vec: np.ndarray, inertia: np.ndarray) -> "RigidBodyState":
        return cls(
            position=np.array(vec[0:3]),
            velocity=np.array(vec[3:6]),
            attitude=Quaternion.from_array(vec[6:10]),
            body_rates=np.array(vec[10:13]),
            inertia=inertia,
        )

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_vector())))


@dataclass(frozen=True)
class ControlDemand:
    """Allocation input; torques in the allocation convention (roll right-wing-down,
    pitch nose-up, yaw nose-right)."""

    tau_roll: float
    tau_pitch: float
    tau_yaw: float
    T_col: float
    chi: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.tau_roll, self.tau_pitch, self.tau_yaw, self.T_col, self.chi)


@dataclass(frozen=True)
class AllocationLimits:
    T_max: float = 30.0
    T_t_max: float = 8.0
    epsilon_max: float = math.radians(30.0)
    denominator_floor: float = 0.5
    tau_aero_scale: float = 200.0


@dataclass(frozen=True)
class ActuatorCommand:
    T_r: float
    T_l: float
    T_t: float
    chi: float
    epsilon: float
    main_clamped: bool = False
    tail_clamped: bool = False
    epsilon_clamped: bool = False
    denominator_floored: bool = False

    @property
    def zeta_r(self) -> float:
        return self.chi + self.epsilon

    @property
    def zeta_l(self) -> float:
        return self.chi - self.epsilon

    @property
    def saturated(self) -> bool:
        return self.main_clamped or self.tail_clamped or self.epsilon_clamped or self.denominator_floored


@dataclass(frozen=True)
class ActuatorLimits:
    tau_rotor: float = 0.05
    servo_rate: float = math.radians(120.0)
    T_min: float = 0.0
    T_max: float = 30.0
    T_t_max: float = 8.0


@dataclass(frozen=True)
class ActuatorState:
    T_r: float
    T_l: float
    T_t: float
    zeta_r: float
    zeta_l: float
    limits: ActuatorLimits = field(default_factory=ActuatorLimits)

    @classmethod
    def from_command(cls, cmd: ActuatorCommand, limits: ActuatorLimits | None = None) -> "ActuatorState":
        return cls(cmd.T_r, cmd.T_l, cmd.T_t, cmd.zeta_r, cmd.zeta_l, limits or ActuatorLimits())

    def as_command(self) -> ActuatorCommand:
        chi = 0.5 * (self.zeta_r + self.zeta_l)
        return ActuatorCommand(self.T_r, self.T_l, self.T_t, chi, 0.5 * (self.zeta_r - self.zeta_l))


NACA0012 = "NACA0012"
NACA0029 = "NACA0029"


@dataclass(frozen=True)
class WingSegment:
    span_start: float
    span_end: float
    profile: str
    in_prop_wash: bool
    area: float
    side: str

    @property
    def center(self) -> float:
        return 0.5 * (self.span_start + self.span_end)


@dataclass(frozen=True)
class LocalFlow:
    v_x_wing: float
    v_z_wing: float
    v_z_wing_tot: float
    v_total_corrected: float
    alpha_effective: float


@dataclass(frozen=True)
class AeroParams:
    """The 26-slot grey-box model. Angles in rad, areas in m^2, c0..c7 in N."""

    wing_lift_slope: float = 5.0
    wing_cd0: float = 0.02
    wing_induced_drag: float = 0.065
    wing_stall_angle: float = math.radians(24.0)
    wing_flat_plate_lift: float = 1.0
    wing_flat_plate_drag: float = 0.6
    nacelle_lift_slope: float = 3.5
    nacelle_cd0: float = 0.05
    nacelle_induced_drag: float = 0.08
    nacelle_stall_angle: float = math.radians(15.0)
    nacelle_flat_plate_lift: float = 0.8
    nacelle_flat_plate_drag: float = 0.8
    stall_width: float = math.radians(4.0)
    fuselage_drag_area: float = 0.015
    tail_inflow_sensitivity: float = 0.02
    prop_wash_efficiency: float = 2.0
    tau_aero_scale: float = 200.0
    roll_trim_asymmetry: float = 0.0
    c0: float = 49.05
    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0
    c4: float = 0.0
    c5: float = 0.0
    c6: float = 0.0
    c7: float = 0.0

    def __post_init__(self):
        values = self.to_vector()
        if not np.all(np.isfinite(values)):
            raise DomainRangeError("Aero parameters must be finite.")
        for name in ("wing_stall_angle", "nacelle_stall_angle"):
            angle = getattr(self, name)
            if not 0.0 < angle < math.radians(45.0):
                raise DomainRangeError(f"{name} must lie in (0, 45) deg, got {math.degrees(angle):.2f} deg.")
        if self.stall_width <= 0.0:
            raise DomainRangeError("stall_width must be positive.")

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in self.names()], dtype=float)

    @classmethod
    def from_vector(cls, vec) -> "AeroParams":
        return cls(**{name: float(v) for name, v in zip(cls.names(), vec)})

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.names()}

    @property
    def thrust_coefficients(self) -> tuple[float, ...]:
        return tuple(getattr(self, f"c{k}") for k in range(8))

    def with_thrust_coefficients(self, coefficients) -> "AeroParams":
        return replace(self, **{f"c{k}": float(c) for k, c in enumerate(coefficients)})


AERO_PARAM_UNITS = {
    "wing_lift_slope": "1/rad",
    "wing_cd0": "-",
    "wing_induced_drag": "-",
    "wing_stall_angle": "rad",
    "wing_flat_plate_lift": "-",
    "wing_flat_plate_drag": "-",
    "nacelle_lift_slope": "1/rad",
    "nacelle_cd0": "-",
    "nacelle_induced_drag": "-",
    "nacelle_stall_angle": "rad",
    "nacelle_flat_plate_lift": "-",
    "nacelle_flat_plate_drag": "-",
    "stall_width": "rad",
    "fuselage_drag_area": "m^2",
    "tail_inflow_sensitivity": "s/m",
    "prop_wash_efficiency": "-",
    "tau_aero_scale": "N*m",
    "roll_trim_asymmetry": "rad",
    **{f"c{k}": f"N/rad^{k}" for k in range(8)},
}


@dataclass(frozen=True)
class ThrustFeedForward:
    c: tuple[float, ...]

    def __post_init__(self):
        if len(self.c) != 8:
            raise DomainRangeError(f"Thrust feed-forward needs 8 coefficients, got {len(self.c)}.")

    def evaluate(self, chi: float) -> float:
        return float(np.polynomial.polynomial.polyval(chi, self.c))


@dataclass
class ControllerState:
    dt: float = 0.005
    omega_int: np.ndarray = field(default_factory=lambda: np.zeros(3))
    prev_omega: np.ndarray | None = None
    omega_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    integral_clamped: bool = False


@dataclass(frozen=True)
class SweepSample:
    flow_speed: float
    flow_angle: float
    chi: float
    epsilon: float
    T_r: float
    T_l: float
    T_t: float
    force: tuple[float, float, float]
    torque: tuple[float, float, float]

    def __post_init__(self):
        values = (self.flow_speed, self.flow_angle, self.chi, self.epsilon, self.T_r, self.T_l, self.T_t, *self.force, *self.torque)
        if not all(math.isfinite(v) for v in values):
            raise DomainRangeError("Sweep samples must be finite.")
        if self.flow_speed < 0.0:
            raise DomainRangeError("flow_speed must be non-negative.")
