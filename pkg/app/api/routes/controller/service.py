import logging
import math

import numpy as np

from app.api.routes.allocation.service import allocate
from app.core.mathcore import (
    body_to_allocation_torque,
    quat_canonical,
    quat_conjugate,
    quat_multiply,
)
from app.core.models import (
    ActuatorCommand,
    AllocationLimits,
    ControlDemand,
    ControllerState,
    Quaternion,
    RigidBodyState,
    ThrustFeedForward,
    VehicleGeometry,
)
from .schemas import AltitudeGains, AttitudeGains

logger = logging.getLogger(__name__)


def attitude_error(q_current: Quaternion, q_desired: Quaternion) -> Quaternion:
    """q_error = q_IB^-1 (x) q_IB', on the w >= 0 hemisphere (shortest rotation)."""
    return quat_canonical(quat_multiply(quat_conjugate(q_current), q_desired))


def attitude_law(q_error: Quaternion, gains: AttitudeGains, yaw_rate_ff: float = 0.0) -> np.ndarray:
    return np.asarray(gains.k_P) * q_error.vector + np.array([0.0, 0.0, yaw_rate_ff])


def rate_law(
    omega,
    omega_sp,
    omega_dot,
    state: ControllerState,
    gains: AttitudeGains,
    inertia=None,
) -> np.ndarray:
    """Rate PID on the error (omega_sp - omega), body axes.

    Gains are inertia-normalized: P, D and the integral increment are scaled by the
    principal inertia. The integral accumulator is clamped per axis.
    """
    inertia = np.ones(3) if inertia is None else np.asarray(inertia, dtype=float)
    error = np.asarray(omega_sp, dtype=float) - np.asarray(omega, dtype=float)

    accumulated = state.omega_int + inertia * np.asarray(gains.k_I_rate) * error * state.dt
    limit = np.asarray(gains.integral_limit)
    state.integral_clamped = bool(np.any(np.abs(accumulated) > limit))
    if state.integral_clamped:
        logger.debug(f"Rate integral clamped: {accumulated}")
    state.omega_int = np.clip(accumulated, -limit, limit)

    return (
        inertia * np.asarray(gains.k_P_rate) * error
        - inertia * np.asarray(gains.k_D_rate) * np.asarray(omega_dot, dtype=float)
        + state.omega_int
    )


def roll_trim(chi: float, gains: AttitudeGains) -> float:
    return gains.tau_trim_roll * math.cos(chi)


def collective_thrust(a_z: float, chi: float, ff: ThrustFeedForward, g: float = 9.81) -> float:
    """T_col = -a_z T_ff / g + T_ff with a_z downward-positive, never negative."""
    T_ff = ff.evaluate(chi)
    return max(0.0, T_ff - a_z * T_ff / g)


def filtered_omega_dot(omega, state: ControllerState, cutoff_hz: float) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if state.prev_omega is not None:
        raw = (omega - state.prev_omega) / state.dt
        alpha = state.dt / (state.dt + 1.0 / (2.0 * math.pi * cutoff_hz))
        state.omega_dot = state.omega_dot + alpha * (raw - state.omega_dot)
    state.prev_omega = omega.copy()
    return state.omega_dot


def control_step(
    state: RigidBodyState,
    q_desired: Quaternion,
    a_z: float,
    chi: float,
    ctrl_state: ControllerState,
    gains: AttitudeGains,
    ff: ThrustFeedForward,
    geometry: VehicleGeometry,
    yaw_rate_ff: float | None = None,
) -> ControlDemand:
    """One 200 Hz tick: attitude error, attitude P, rate PID plus roll trim, collective thrust."""
    yaw_rate_ff = gains.yaw_rate_ff if yaw_rate_ff is None else yaw_rate_ff

    q_error = attitude_error(state.attitude, q_desired)
    omega_sp = attitude_law(q_error, gains, yaw_rate_ff)
    omega_dot = filtered_omega_dot(state.body_rates, ctrl_state, gains.omega_dot_cutoff_hz)
    tau_body = rate_law(state.body_rates, omega_sp, omega_dot, ctrl_state, gains, np.diag(state.inertia))

    tau_roll, tau_pitch, tau_yaw = body_to_allocation_torque(tau_body)
    tau_roll += roll_trim(chi, gains)

    return ControlDemand(
        tau_roll=float(tau_roll),
        tau_pitch=float(tau_pitch),
        tau_yaw=float(tau_yaw),
        T_col=collective_thrust(a_z, chi, ff, geometry.g),
        chi=chi,
    )


class AltitudeHold:
    """Altitude loop on the a_z channel.

    The upward acceleration request is divided by sin(chi)^2, the share of a
    collective-thrust change that acts vertically, before entering a_z.
    """

    def __init__(self, gains: AltitudeGains, z_ref: float, dt: float):
        self.gains = gains
        self.z_ref = z_ref
        self.dt = dt
        self.integral = 0.0

    def update(self, z: float, v_z: float, chi: float, a_z_cmd: float = 0.0, g: float = 9.81) -> float:
        if not self.gains.enabled:
            return a_z_cmd
        error = self.z_ref - z
        self.integral = float(
            np.clip(self.integral + self.gains.k_iz * error * self.dt, -self.gains.integral_limit, self.gains.integral_limit)
        )
        a_up = self.gains.k_z * error - self.gains.k_vz * v_z + self.integral
        a_z = a_z_cmd - a_up / max(math.sin(chi) ** 2, 0.05)
        return float(np.clip(a_z, -g, 0.9 * g))


class LowLevelController:
    """Owns the controller state of one vehicle and runs control_step plus allocation."""

    def __init__(
        self,
        gains: AttitudeGains,
        ff: ThrustFeedForward,
        geometry: VehicleGeometry,
        limits: AllocationLimits | None = None,
        altitude: AltitudeHold | None = None,
        dt: float = 0.005,
    ):
        self.gains = gains
        self.ff = ff
        self.geometry = geometry
        self.limits = limits or AllocationLimits()
        self.altitude = altitude
        self.state = ControllerState(dt=dt)

    def step(
        self,
        body: RigidBodyState,
        q_desired: Quaternion,
        chi: float,
        a_z_cmd: float = 0.0,
        yaw_rate_ff: float | None = None,
    ) -> tuple[ControlDemand, ActuatorCommand, float]:
        a_z = a_z_cmd
        if self.altitude is not None:
            a_z = self.altitude.update(body.position[2], body.velocity[2], chi, a_z_cmd, self.geometry.g)
        demand = control_step(body, q_desired, a_z, chi, self.state, self.gains, self.ff, self.geometry, yaw_rate_ff)
        command = allocate(demand, self.geometry, self.limits)
        return demand, command, a_z
