import logging
import math

import numpy as np

from app.api.utils.responses import AllocationInputError, AllocationSaturationError, DomainRangeError
from app.core.models import ActuatorCommand, AllocationLimits, ControlDemand, VehicleGeometry

logger = logging.getLogger(__name__)

_CHI_TOLERANCE = 1e-12


def tau_aero_model(chi: float, geometry: VehicleGeometry, scale: float = 200.0) -> float:
    """Roll authority of the differential wing tilt, quadratic in the distance from hover."""
    _check_chi(chi, geometry)
    half_pi = 0.5 * math.pi
    return scale * (chi - half_pi) ** 2 / (geometry.chi_min - half_pi) ** 2


def _check_chi(chi: float, geometry: VehicleGeometry):
    if not math.isfinite(chi):
        raise AllocationInputError(f"chi must be finite, got {chi}.")
    if chi < geometry.chi_min - _CHI_TOLERANCE or chi > 0.5 * math.pi + _CHI_TOLERANCE:
        raise DomainRangeError(
            f"chi={math.degrees(chi):.3f} deg outside [{math.degrees(geometry.chi_min):.3f}, 90] deg."
        )


def allocate(
    demand: ControlDemand,
    geometry: VehicleGeometry,
    limits: AllocationLimits | None = None,
    strict: bool = False,
) -> ActuatorCommand:
    """Closed-form allocation of torques, collective thrust and overall tilt to the five actuators.

    Torques follow the allocation convention (roll right-wing-down, pitch nose-up,
    yaw nose-right). Saturation is reported through the command flags; with
    strict=True a floored differential-tilt denominator raises instead.
    """
    limits = limits or AllocationLimits()
    if not all(math.isfinite(v) for v in demand.as_tuple()):
        raise AllocationInputError(f"Allocation inputs must be finite, got {demand}.")
    if demand.T_col < 0.0:
        raise DomainRangeError(f"T_col must be >= 0, got {demand.T_col}.")
    _check_chi(demand.chi, geometry)

    chi = demand.chi
    b = geometry.b
    gmy = geometry.g * geometry.m * geometry.y_offset
    s, c = math.sin(chi), math.cos(chi)

    T_r = ((demand.T_col * b + gmy - demand.tau_roll) * s - demand.tau_yaw * c) / (2.0 * b)
    T_l = ((demand.T_col * b - gmy + demand.tau_roll) * s + demand.tau_yaw * c) / (2.0 * b)

    denominator = demand.T_col * b + tau_aero_model(chi, geometry, limits.tau_aero_scale)
    denominator_floored = denominator < limits.denominator_floor
    if denominator_floored:
        denominator = limits.denominator_floor
    epsilon = ((gmy - demand.tau_roll) * c + demand.tau_yaw * s) / denominator

    epsilon_clamped = abs(epsilon) > limits.epsilon_max
    epsilon = float(np.clip(epsilon, -limits.epsilon_max, limits.epsilon_max))

    main_clamped = not (0.0 <= T_r <= limits.T_max and 0.0 <= T_l <= limits.T_max)
    T_r = float(np.clip(T_r, 0.0, limits.T_max))
    T_l = float(np.clip(T_l, 0.0, limits.T_max))

    T_t = _tail_thrust(T_r, T_l, chi, epsilon, demand.tau_pitch, geometry)
    tail_clamped = abs(T_t) > limits.T_t_max
    T_t = float(np.clip(T_t, -limits.T_t_max, limits.T_t_max))

    command = ActuatorCommand(
        T_r=T_r,
        T_l=T_l,
        T_t=T_t,
        chi=chi,
        epsilon=epsilon,
        main_clamped=main_clamped,
        tail_clamped=tail_clamped,
        epsilon_clamped=epsilon_clamped,
        denominator_floored=denominator_floored,
    )
    if command.saturated:
        logger.debug(f"Allocation saturated: {command}")
    if denominator_floored and strict:
        raise AllocationSaturationError(
            message=f"Differential tilt denominator floored to {denominator} N*m.",
            floored_value=denominator,
            command=command,
        )
    return command


def _tail_thrust(T_r, T_l, chi, epsilon, tau_pitch, geometry: VehicleGeometry):
    arm = geometry.l + geometry.x_offset
    x_off, z_off = geometry.x_offset, geometry.z_offset
    zeta_r, zeta_l = chi + epsilon, chi - epsilon
    return (
        -T_r * x_off * np.sin(zeta_r) / arm
        + T_r * z_off * np.cos(zeta_r) / arm
        - T_l * x_off * np.sin(zeta_l) / arm
        + T_l * z_off * np.cos(zeta_l) / arm
        - tau_pitch / arm
    )


def reconstruct_wrench(cmd: ActuatorCommand, geometry: VehicleGeometry, chi: float, tau_aero_scale: float = 200.0):
    """Torques and collective thrust the command produces about the CoG, without small-angle terms.

    Returns ((tau_roll, tau_pitch, tau_yaw), T_col) in the allocation convention.
    """
    b = geometry.b
    gmy = geometry.g * geometry.m * geometry.y_offset
    s, c = math.sin(chi), math.cos(chi)
    sin_e, cos_e = math.sin(cmd.epsilon), math.cos(cmd.epsilon)

    collective = (cmd.T_r + cmd.T_l) * cos_e / s
    authority = collective * b + tau_aero_model(chi, geometry, tau_aero_scale)
    differential = b * (cmd.T_l - cmd.T_r) * cos_e

    tau_roll = differential * s - sin_e * authority * c + gmy
    tau_yaw = differential * c + sin_e * authority * s
    tau_pitch = (
        cmd.T_r * (-geometry.x_offset * math.sin(cmd.zeta_r) + geometry.z_offset * math.cos(cmd.zeta_r))
        + cmd.T_l * (-geometry.x_offset * math.sin(cmd.zeta_l) + geometry.z_offset * math.cos(cmd.zeta_l))
        - (geometry.l + geometry.x_offset) * cmd.T_t
    )
    return np.array([tau_roll, tau_pitch, tau_yaw]), collective


def allocate_batch(tau, T_col, chi, geometry: VehicleGeometry, limits: AllocationLimits | None = None):
    """Vectorized allocate for arrays of demands; returns a dict of arrays including a 'saturated' mask."""
    limits = limits or AllocationLimits()
    tau = np.asarray(tau, dtype=float)
    T_col = np.asarray(T_col, dtype=float)
    chi = np.asarray(chi, dtype=float)
    if not (np.all(np.isfinite(tau)) and np.all(np.isfinite(T_col)) and np.all(np.isfinite(chi))):
        raise AllocationInputError("Allocation inputs must be finite.")

    b = geometry.b
    gmy = geometry.g * geometry.m * geometry.y_offset
    s, c = np.sin(chi), np.cos(chi)
    tau_roll, tau_pitch, tau_yaw = tau[:, 0], tau[:, 1], tau[:, 2]

    T_r = ((T_col * b + gmy - tau_roll) * s - tau_yaw * c) / (2.0 * b)
    T_l = ((T_col * b - gmy + tau_roll) * s + tau_yaw * c) / (2.0 * b)
    tau_aero = limits.tau_aero_scale * (chi - 0.5 * np.pi) ** 2 / (geometry.chi_min - 0.5 * np.pi) ** 2
    denominator = T_col * b + tau_aero
    floored = denominator < limits.denominator_floor
    epsilon = ((gmy - tau_roll) * c + tau_yaw * s) / np.maximum(denominator, limits.denominator_floor)
    T_t = _tail_thrust(T_r, T_l, chi, epsilon, tau_pitch, geometry)

    saturated = (
        floored
        | (np.abs(epsilon) > limits.epsilon_max)
        | (T_r < 0.0)
        | (T_l < 0.0)
        | (T_r > limits.T_max)
        | (T_l > limits.T_max)
        | (np.abs(T_t) > limits.T_t_max)
    )
    return {"T_r": T_r, "T_l": T_l, "T_t": T_t, "epsilon": epsilon, "saturated": saturated}


def reconstruct_batch(alloc: dict, chi, geometry: VehicleGeometry, tau_aero_scale: float = 200.0):
    chi = np.asarray(chi, dtype=float)
    b = geometry.b
    gmy = geometry.g * geometry.m * geometry.y_offset
    s, c = np.sin(chi), np.cos(chi)
    eps = alloc["epsilon"]
    T_r, T_l, T_t = alloc["T_r"], alloc["T_l"], alloc["T_t"]
    sin_e, cos_e = np.sin(eps), np.cos(eps)

    collective = (T_r + T_l) * cos_e / s
    tau_aero = tau_aero_scale * (chi - 0.5 * np.pi) ** 2 / (geometry.chi_min - 0.5 * np.pi) ** 2
    authority = collective * b + tau_aero
    differential = b * (T_l - T_r) * cos_e
    zeta_r, zeta_l = chi + eps, chi - eps

    tau = np.stack(
        [
            differential * s - sin_e * authority * c + gmy,
            T_r * (-geometry.x_offset * np.sin(zeta_r) + geometry.z_offset * np.cos(zeta_r))
            + T_l * (-geometry.x_offset * np.sin(zeta_l) + geometry.z_offset * np.cos(zeta_l))
            - (geometry.l + geometry.x_offset) * T_t,
            differential * c + sin_e * authority * s,
        ],
        axis=1,
    )
    return tau, collective


def allocation_round_trip(
    n_samples: int = 100_000,
    seed: int = 0,
    geometry: VehicleGeometry | None = None,
    limits: AllocationLimits | None = None,
    epsilon_bound: float = math.radians(3.0),
) -> dict:
    """Random demands through allocate and back through reconstruct_wrench.

    Only non-saturated samples with |epsilon| within the bound are scored.
    """
    geometry = geometry or VehicleGeometry()
    limits = limits or AllocationLimits()
    rng = np.random.default_rng(seed)

    chi = rng.uniform(geometry.chi_min, 0.5 * np.pi, n_samples)
    T_col = rng.uniform(10.0, 55.0, n_samples)
    tau = rng.uniform(-1.0, 1.0, (n_samples, 3)) * np.array([2.0, 3.0, 2.0])

    alloc = allocate_batch(tau, T_col, chi, geometry, limits)
    scored = ~alloc["saturated"] & (np.abs(alloc["epsilon"]) <= epsilon_bound)
    tau_rec, collective_rec = reconstruct_batch(alloc, chi, geometry, limits.tau_aero_scale)

    tau_error = np.abs(tau_rec - tau)[scored]
    tau_allowed = np.maximum(0.02 * np.abs(tau[scored]), 0.01)
    thrust_error = np.abs(collective_rec - T_col)[scored] / T_col[scored]

    torque_ok = tau_error <= tau_allowed
    thrust_ok = thrust_error <= 0.01
    report = {
        "samples": int(n_samples),
        "scored": int(scored.sum()),
        "torque_failures": int((~torque_ok).any(axis=1).sum()),
        "thrust_failures": int((~thrust_ok).sum()),
        "max_torque_error_Nm": float(tau_error.max()) if tau_error.size else 0.0,
        "max_thrust_error_rel": float(thrust_error.max()) if thrust_error.size else 0.0,
    }
    report["passed"] = report["scored"] > 0 and report["torque_failures"] == 0 and report["thrust_failures"] == 0
    logger.info(f"Allocation round trip: {report}")
    return report
