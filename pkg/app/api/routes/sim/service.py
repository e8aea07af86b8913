import json
import logging
import math
import os
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np
import pandas as pd
from fastapi import HTTPException
from pydantic import ValidationError

from app.api.routes.aero.service import default_layout, load_aero_params, wrench_batch
from app.api.routes.controller.service import AltitudeHold, LowLevelController
from app.api.routes.sysid.service import default_thrust_ff, trim_at_airspeed, trim_level_flight
from app.api.utils.responses import DomainRangeError, ScenarioFileError, SimulationDivergenceError
from app.core.mathcore import quat_derivative, quat_from_euler, quat_to_euler, quat_to_matrix
from app.core.models import (
    ActuatorCommand,
    ActuatorLimits,
    ActuatorState,
    AeroParams,
    Quaternion,
    RigidBodyState,
    ThrustFeedForward,
    VehicleGeometry,
)
from .schemas import PowerConfig, ScenarioFile, TimelinePoint

logger = logging.getLogger(__name__)

LOG_COLUMNS = [
    "t",
    "x",
    "y",
    "z",
    "vx",
    "vy",
    "vz",
    "qw",
    "qx",
    "qy",
    "qz",
    "p",
    "q",
    "r",
    "chi",
    "epsilon",
    "T_r",
    "T_l",
    "T_t",
    "zeta_r",
    "zeta_l",
    "power_total",
    "airspeed",
    "roll_deg",
    "pitch_deg",
    "yaw_deg",
    "tau_roll",
    "tau_pitch",
    "tau_yaw",
    "T_col",
    "a_z",
    "T_r_act",
    "T_l_act",
    "T_t_act",
    "zeta_r_act",
    "zeta_l_act",
    "saturated",
]

MAX_BODY_RATE = 50.0
MAX_SPEED = 100.0


class RigidBodyModel:
    """Newton-Euler right-hand side on the 13-vector (position, velocity, q_IB, body rates).

    Built once per run; the inertia inverse and segment layout are fixed for the airframe.
    """

    def __init__(self, params: AeroParams, geometry: VehicleGeometry, inertia=None, aero_enabled: bool = True):
        self.params = params
        self.geometry = geometry
        self.inertia = np.asarray(geometry.inertia_matrix if inertia is None else inertia, dtype=float)
        self.inertia_inv = np.linalg.inv(self.inertia)
        self.aero_enabled = aero_enabled
        self.layout = default_layout(geometry)
        self.mass = geometry.m
        self.gravity = np.array([0.0, 0.0, -geometry.g])

    def wrench(self, x: np.ndarray, act: ActuatorState, wind: np.ndarray):
        R = quat_to_matrix(Quaternion.from_array(x[6:10]))
        v_air = R.T @ (x[3:6] - wind)
        force, torque = wrench_batch(
            v_air,
            x[10:13],
            act.zeta_r,
            act.zeta_l,
            act.T_r,
            act.T_l,
            act.T_t,
            self.params,
            self.geometry,
            self.layout,
            include_wing=self.aero_enabled,
        )
        return force[0], torque[0]

    def derivative(self, x: np.ndarray, force_b, torque_b) -> np.ndarray:
        q = Quaternion.from_array(x[6:10])
        omega = x[10:13]
        h = self.inertia @ omega
        gyroscopic = np.array(
            [
                omega[1] * h[2] - omega[2] * h[1],
                omega[2] * h[0] - omega[0] * h[2],
                omega[0] * h[1] - omega[1] * h[0],
            ]
        )
        dx = np.empty(13)
        dx[0:3] = x[3:6]
        dx[3:6] = quat_to_matrix(q) @ force_b / self.mass + self.gravity
        dx[6:10] = quat_derivative(q, omega)
        dx[10:13] = self.inertia_inv @ (torque_b - gyroscopic)
        return dx

    def advance(self, x: np.ndarray, act: ActuatorState, wind, dt: float, integrator: str = "rk4", wrench_hold: str = "step") -> np.ndarray:
        if not dt > 0.0:
            raise DomainRangeError(f"dt must be positive, got {dt}.")
        wind = np.asarray(wind, dtype=float)
        force, torque = self.wrench(x, act, wind)

        if integrator == "rk4":
            if wrench_hold == "stage":

                def f(y):
                    return self.derivative(y, *self.wrench(y, act, wind))

                k1 = self.derivative(x, force, torque)
            else:

                def f(y):
                    return self.derivative(y, force, torque)

                k1 = f(x)
            k2 = f(x + 0.5 * dt * k1)
            k3 = f(x + 0.5 * dt * k2)
            k4 = f(x + dt * k3)
            x_next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        elif integrator == "euler":
            # semi-implicit: rates and velocity first, then attitude and position with the new values
            d = self.derivative(x, force, torque)
            x_next = x.copy()
            x_next[10:13] = x[10:13] + dt * d[10:13]
            x_next[3:6] = x[3:6] + dt * d[3:6]
            x_next[6:10] = x[6:10] + dt * quat_derivative(Quaternion.from_array(x[6:10]), x_next[10:13])
            x_next[0:3] = x[0:3] + dt * x_next[3:6]
        else:
            raise DomainRangeError(f"Unknown integrator: {integrator}")

        x_next[6:10] /= np.linalg.norm(x_next[6:10])
        _check_divergence(x_next)
        return x_next


def _check_divergence(x: np.ndarray):
    reason = None
    if not np.all(np.isfinite(x)):
        reason = "non-finite state"
    elif np.linalg.norm(x[10:13]) > MAX_BODY_RATE:
        reason = f"|omega| > {MAX_BODY_RATE} rad/s"
    elif np.linalg.norm(x[3:6]) > MAX_SPEED:
        reason = f"|v| > {MAX_SPEED} m/s"
    if reason is not None:
        raise SimulationDivergenceError(f"Simulation diverged: {reason}. State: {np.array2string(x, precision=4)}")


def step_physics(
    state: RigidBodyState,
    act: ActuatorState,
    wind,
    params: AeroParams,
    geometry: VehicleGeometry,
    dt: float,
    integrator: str = "rk4",
    aero_enabled: bool = True,
    wrench_hold: str = "step",
    model: RigidBodyModel | None = None,
) -> RigidBodyState:
    """Advance the rigid body by dt under gravity, rotor thrusts and (optionally) wing aerodynamics.

    With wrench_hold="step" the external wrench is evaluated once at the start of the
    step and held over the RK4 stages; "stage" re-evaluates it at every stage.
    """
    model = model or RigidBodyModel(params, geometry, state.inertia, aero_enabled)
    x_next = model.advance(state.as_vector(), act, wind, dt, integrator, wrench_hold)
    return RigidBodyState.from_vector(x_next, state.inertia)


def step_actuators(act: ActuatorState, cmd: ActuatorCommand, dt: float) -> ActuatorState:
    """First-order thrust lag toward the command and rate-limited tilt servos."""
    if not dt > 0.0:
        raise DomainRangeError(f"dt must be positive, got {dt}.")
    limits = act.limits
    blend = 1.0 - math.exp(-dt / limits.tau_rotor)
    step = limits.servo_rate * dt

    def lag(actual, commanded, low, high):
        return min(max(actual + blend * (commanded - actual), low), high)

    def slew(actual, commanded):
        return actual + min(max(commanded - actual, -step), step)

    return ActuatorState(
        T_r=lag(act.T_r, cmd.T_r, limits.T_min, limits.T_max),
        T_l=lag(act.T_l, cmd.T_l, limits.T_min, limits.T_max),
        T_t=lag(act.T_t, cmd.T_t, -limits.T_t_max, limits.T_t_max),
        zeta_r=slew(act.zeta_r, cmd.zeta_r),
        zeta_l=slew(act.zeta_l, cmd.zeta_l),
        limits=limits,
    )


def rotor_power(thrust, disc_area: float, rho: float, power: PowerConfig | None = None):
    """Electrical power of one rotor: induced power over propeller efficiency plus a profile term linear in thrust."""
    power = power or PowerConfig()
    thrust = np.abs(np.asarray(thrust, dtype=float))
    return thrust**1.5 / math.sqrt(2.0 * rho * disc_area) / power.eta_prop + power.k_profile_WpN * thrust


def total_power(act: ActuatorState, geometry: VehicleGeometry, power: PowerConfig | None = None) -> float:
    main = rotor_power(np.array([act.T_r, act.T_l]), geometry.disc_area, geometry.rho, power).sum()
    tail = rotor_power(act.T_t, geometry.tail_disc_area, geometry.rho, power)
    return float(main + tail)


def setpoint_at(timeline: list[TimelinePoint], t: float) -> dict[str, float]:
    """Linear interpolation of the scenario script, held constant outside its time span."""
    times = [p.t_s for p in timeline]
    fields = ["chi_deg", "roll_deg", "pitch_deg", "yaw_deg", "a_z_mps2", "yaw_rate_ff_dps"]
    return {name: float(np.interp(t, times, [getattr(p, name) for p in timeline])) for name in fields}


class TimeSeriesLog:
    def __init__(self, name: str = "scenario"):
        self.name = name
        self.rows: list[list[float]] = []
        self.summary: dict = {}

    def append(self, row: list[float]):
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    @property
    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=LOG_COLUMNS)

    def to_csv(self, path: str) -> str:
        self.frame.to_csv(path, index=False, float_format="%.6g")
        logger.info(f"Time series written to {path}")
        return path

    def write_summary(self, path: str) -> str:
        with open(path, "w") as file:
            json.dump(self.summary, file, indent=2)
        logger.info(f"Summary written to {path}")
        return path


def summarize(log: TimeSeriesLog, z_ref: float, chi_min_cmd: float, diverged: bool = False) -> dict:
    frame = log.frame
    if frame.empty:
        return {"name": log.name, "diverged": diverged, "duration_s": 0.0}

    altitude_error = frame["z"] - z_ref
    hover = frame[frame["chi"] >= math.radians(89.9)]
    cruise = frame[frame["chi"] <= chi_min_cmd + 1e-6]
    hover_power = float(hover["power_total"].median()) if not hover.empty else None
    cruise_power = float(cruise["power_total"].median()) if not cruise.empty and chi_min_cmd < math.radians(89.9) else None
    reduction = 100.0 * (1.0 - cruise_power / hover_power) if hover_power and cruise_power is not None else None

    return {
        "name": log.name,
        "diverged": diverged,
        "duration_s": float(frame["t"].iloc[-1]),
        "ticks": len(frame),
        "altitude_drift_m": float(abs(altitude_error.iloc[-1])),
        "max_altitude_error_m": float(altitude_error.abs().max()),
        "max_airspeed_mps": float(frame["airspeed"].max()),
        "airspeed_at_min_chi_mps": float(cruise["airspeed"].max()) if not cruise.empty else None,
        "hover_power_W": hover_power,
        "cruise_power_W": cruise_power,
        "power_reduction_pct": reduction,
        "min_power_W": float(frame["power_total"].min()),
        "final_roll_deg": float(frame["roll_deg"].iloc[-1]),
        "max_abs_roll_deg": float(frame["roll_deg"].abs().max()),
        "saturated_ticks": int(frame["saturated"].sum()),
    }


def _initial_state(scenario: ScenarioFile, geometry: VehicleGeometry) -> RigidBodyState:
    initial = scenario.sim.initial
    return RigidBodyState(
        position=np.array(initial.position_m, dtype=float),
        velocity=np.array(initial.velocity_mps, dtype=float),
        attitude=quat_from_euler(math.radians(initial.roll_deg), math.radians(initial.pitch_deg), math.radians(initial.yaw_deg)),
        body_rates=np.radians(np.array(initial.body_rates_dps, dtype=float)),
        inertia=geometry.inertia_matrix,
    )


def _measured(state: RigidBodyState, scenario: ScenarioFile, rng: np.random.Generator) -> RigidBodyState:
    noise = scenario.sim.noise
    if not noise.enabled:
        return state
    tilt = rng.normal(0.0, noise.attitude_std_rad, 3)
    roll, pitch, yaw = quat_to_euler(state.attitude)
    return RigidBodyState(
        position=state.position + rng.normal(0.0, noise.position_std_m, 3),
        velocity=state.velocity + rng.normal(0.0, noise.velocity_std_mps, 3),
        attitude=quat_from_euler(roll + tilt[0], pitch + tilt[1], yaw + tilt[2]),
        body_rates=state.body_rates + rng.normal(0.0, noise.gyro_std_rps, 3),
        inertia=state.inertia,
    )


def _resolve_params(scenario: ScenarioFile, base_dir: str | None) -> AeroParams:
    if scenario.aero_params_file is None:
        return AeroParams()
    path = scenario.aero_params_file
    if base_dir is not None and not os.path.isabs(path):
        path = os.path.join(base_dir, path)
    try:
        return load_aero_params(path)
    except (OSError, ValidationError, DomainRangeError) as e:
        raise ScenarioFileError(f"Aero parameter file {path} cannot be used: {e}")


def _resolve_thrust_ff(scenario: ScenarioFile, geometry: VehicleGeometry, params: AeroParams) -> ThrustFeedForward:
    if scenario.thrust_ff_coefficients is not None:
        return ThrustFeedForward(tuple(scenario.thrust_ff_coefficients))
    # c0..c7 of a parameter file override the fitted default when they were changed from the constant m*g
    if scenario.aero_params_file is not None and params.thrust_coefficients != AeroParams().thrust_coefficients:
        return ThrustFeedForward(params.thrust_coefficients)
    return default_thrust_ff(geometry, params)


def run_scenario(
    scenario: ScenarioFile,
    params: AeroParams | None = None,
    ff: ThrustFeedForward | None = None,
    base_dir: str | None = None,
) -> TimeSeriesLog:
    """Closed loop: 200 Hz controller and allocation over the physics loop, one log row per control tick."""
    config = scenario.sim
    geometry = scenario.vehicle.to_geometry()
    params = params or _resolve_params(scenario, base_dir)
    ff = ff or _resolve_thrust_ff(scenario, geometry, params)
    actuator_limits = scenario.actuators.to_actuator_limits()

    state = _initial_state(scenario, geometry)
    model = RigidBodyModel(params, geometry, state.inertia)
    x = state.as_vector()
    z_ref = float(x[2])
    controller = LowLevelController(
        scenario.gains,
        ff,
        geometry,
        scenario.actuators.to_allocation_limits(),
        AltitudeHold(scenario.altitude, z_ref, config.dt_control_s),
        config.dt_control_s,
    )
    rng = np.random.default_rng(config.seed)
    log = TimeSeriesLog(scenario.name)
    chi_min_cmd = math.radians(min(p.chi_deg for p in config.timeline))

    n_ticks = int(round(config.duration_s / config.dt_control_s))
    dt = config.dt_physics_s
    act: ActuatorState | None = None
    started = time.perf_counter()
    logger.info(f"Simulation '{scenario.name}' started: {config.duration_s} s, {config.integrator}, dt={dt}")

    try:
        for tick in range(n_ticks + 1):
            t = tick * config.dt_control_s
            sp = setpoint_at(config.timeline, t)
            chi = math.radians(sp["chi_deg"])
            q_desired = quat_from_euler(math.radians(sp["roll_deg"]), math.radians(sp["pitch_deg"]), math.radians(sp["yaw_deg"]))

            demand, command, a_z = controller.step(
                _measured(state, scenario, rng),
                q_desired,
                chi,
                sp["a_z_mps2"],
                math.radians(sp["yaw_rate_ff_dps"]),
            )
            if act is None:
                act = ActuatorState.from_command(command, actuator_limits)

            wind = config.wind.at(t)
            log.append(_log_row(t, state, command, act, demand, a_z, wind, geometry, scenario.power))
            if tick == n_ticks:
                break

            for sub in range(config.substeps):
                act = step_actuators(act, command, dt)
                x = model.advance(x, act, config.wind.at(t + sub * dt), dt, config.integrator, config.wrench_hold)
            state = RigidBodyState.from_vector(x, state.inertia)
    except SimulationDivergenceError as e:
        log.summary = summarize(log, z_ref, chi_min_cmd, diverged=True)
        message = f"t={log.rows[-1][0]:.3f} s: {e.message}" if log.rows else e.message
        logger.error(f"Simulation '{scenario.name}' aborted at {message}")
        raise SimulationDivergenceError(message, log=log)

    log.summary = summarize(log, z_ref, chi_min_cmd)
    log.summary["wall_time_s"] = time.perf_counter() - started
    logger.info(
        f"Simulation '{scenario.name}' finished in {log.summary['wall_time_s']:.1f} s, "
        f"altitude drift {log.summary['altitude_drift_m']:.3f} m"
    )
    return log


def _log_row(t, state: RigidBodyState, command: ActuatorCommand, act: ActuatorState, demand, a_z, wind, geometry, power) -> list[float]:
    q = state.attitude
    roll, pitch, yaw = quat_to_euler(q)
    return [
        t,
        *state.position,
        *state.velocity,
        q.w,
        q.x,
        q.y,
        q.z,
        *state.body_rates,
        command.chi,
        command.epsilon,
        command.T_r,
        command.T_l,
        command.T_t,
        command.zeta_r,
        command.zeta_l,
        total_power(act, geometry, power),
        float(np.linalg.norm(state.velocity - wind)),
        math.degrees(roll),
        math.degrees(pitch),
        math.degrees(yaw),
        demand.tau_roll,
        demand.tau_pitch,
        demand.tau_yaw,
        demand.T_col,
        a_z,
        act.T_r,
        act.T_l,
        act.T_t,
        act.zeta_r,
        act.zeta_l,
        float(command.saturated),
    ]


def load_scenario(path: str) -> ScenarioFile:
    try:
        with open(path, "rb") as file:
            data = tomllib.load(file)
    except OSError as e:
        logging.error(f"Scenario file cannot be opened: {path}")
        raise ScenarioFileError(f"Scenario file cannot be opened: {e}")
    except tomllib.TOMLDecodeError as e:
        logging.error(f"Scenario file is not valid TOML: {path}")
        raise ScenarioFileError(f"Scenario file {path} is not valid TOML: {e}")

    try:
        return ScenarioFile.model_validate(data)
    except ValidationError as e:
        raise ScenarioFileError(f"Scenario file {path} is invalid: {e}")
    except HTTPException as e:
        raise ScenarioFileError(f"Scenario file {path} is invalid: {e.detail}")


def run_scenario_file(path: str) -> TimeSeriesLog:
    scenario = load_scenario(path)
    return run_scenario(scenario, base_dir=os.path.dirname(os.path.abspath(path)))


def level_flight_power_reduction(
    airspeed: float = 10.0,
    params: AeroParams | None = None,
    geometry: VehicleGeometry | None = None,
    power: PowerConfig | None = None,
) -> dict:
    """Modeled electrical power in steady level flight at airspeed against hover, both from trim."""
    params = params or AeroParams()
    geometry = geometry or VehicleGeometry()
    _, hover_thrust, _ = trim_level_flight(0.5 * math.pi, params, geometry)
    chi, cruise_thrust = trim_at_airspeed(airspeed, params, geometry)

    def pair_power(T_sum):
        half = 0.5 * T_sum
        return total_power(ActuatorState(half, half, 0.0, 0.5 * math.pi, 0.5 * math.pi, ActuatorLimits()), geometry, power)

    hover_power = pair_power(hover_thrust)
    cruise_power = pair_power(cruise_thrust)
    return {
        "airspeed_mps": airspeed,
        "chi_deg": math.degrees(chi),
        "hover_thrust_N": float(hover_thrust),
        "cruise_thrust_N": float(cruise_thrust),
        "hover_power_W": hover_power,
        "cruise_power_W": cruise_power,
        "power_reduction_pct": 100.0 * (1.0 - cruise_power / hover_power),
    }
