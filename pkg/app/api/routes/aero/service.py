import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from fastapi import HTTPException
from pydantic import TypeAdapter, ValidationError

from app.api.utils.responses import DomainRangeError
from app.core.mathcore import cog_in_body, rotate_vector_inverse
from app.core.models import (
    NACA0012,
    NACA0029,
    ActuatorCommand,
    AeroParams,
    LocalFlow,
    RigidBodyState,
    VehicleGeometry,
    WingSegment,
)

logger = logging.getLogger(__name__)

_aero_params_adapter = TypeAdapter(AeroParams)


@dataclass(frozen=True)
class SegmentLayout:
    """Column arrays of a segment list, one entry per segment."""

    y: np.ndarray
    area: np.ndarray
    is_nacelle: np.ndarray
    is_right: np.ndarray
    washed: np.ndarray


def build_segments(geometry: VehicleGeometry, n_wing: int = 8, n_nacelle: int = 2) -> list[WingSegment]:
    """Tile each half-wing with NACA0012 strips inboard and NACA0029 nacelle strips at the tip.

    A strip is in the prop wash when its centre lies within D/sqrt(2) of the rotor axis.
    """
    if n_wing < 1 or n_nacelle < 0:
        raise DomainRangeError("Need at least one wing segment per side.")
    half_span = 0.5 * geometry.wingspan
    nacelle_start = half_span - (geometry.nacelle_width if n_nacelle > 0 else 0.0)
    wash_radius = geometry.D / math.sqrt(2.0)

    edges = [(a, b, NACA0012) for a, b in _pairs(np.linspace(0.0, nacelle_start, n_wing + 1))]
    if n_nacelle > 0:
        edges += [(a, b, NACA0029) for a, b in _pairs(np.linspace(nacelle_start, half_span, n_nacelle + 1))]

    segments = []
    for side, sign in (("right", -1.0), ("left", 1.0)):
        for start, end, profile in edges:
            center = 0.5 * (start + end)
            segments.append(
                WingSegment(
                    span_start=sign * start,
                    span_end=sign * end,
                    profile=profile,
                    in_prop_wash=abs(center - geometry.b) <= wash_radius,
                    area=(end - start) * geometry.chord,
                    side=side,
                )
            )
    return segments


def _pairs(points):
    return [(float(points[i]), float(points[i + 1])) for i in range(len(points) - 1)]


@lru_cache(maxsize=32)
def default_segments(geometry: VehicleGeometry) -> tuple[WingSegment, ...]:
    return tuple(build_segments(geometry))


def segment_layout(segments) -> SegmentLayout:
    return SegmentLayout(
        y=np.array([s.center for s in segments]),
        area=np.array([s.area for s in segments]),
        is_nacelle=np.array([s.profile == NACA0029 for s in segments]),
        is_right=np.array([s.side == "right" for s in segments]),
        washed=np.array([s.in_prop_wash for s in segments]),
    )


@lru_cache(maxsize=32)
def default_layout(geometry: VehicleGeometry) -> SegmentLayout:
    return segment_layout(default_segments(geometry))


def prop_wash_correction(
    v_z_wing: float,
    v_x_wing: float,
    T: float,
    geometry: VehicleGeometry,
    efficiency: float = 1.0,
) -> LocalFlow:
    """Slipstream-corrected chordwise velocity and effective angle of attack.

    The chordwise term is sign(S) * sqrt(|S|) with S = v_z|v_z| + k*4T/(pi*rho*D^2),
    which equals sqrt(v_z^2 + k*4T/(pi*rho*D^2)) for v_z >= 0.
    """
    if not math.isfinite(T) or T < 0.0:
        raise DomainRangeError(f"Rotor thrust for the prop-wash correction must be >= 0, got {T}.")
    v_z_tot, v_total, alpha = _corrected_flow(
        np.asarray(v_z_wing, dtype=float),
        np.asarray(v_x_wing, dtype=float),
        efficiency * 4.0 * T / (math.pi * geometry.rho * geometry.D**2),
    )
    return LocalFlow(
        v_x_wing=float(v_x_wing),
        v_z_wing=float(v_z_wing),
        v_z_wing_tot=float(v_z_tot),
        v_total_corrected=float(v_total),
        alpha_effective=float(alpha),
    )


def _corrected_flow(v_z, v_x, wash_sq):
    s = v_z * np.abs(v_z) + wash_sq
    v_z_tot = np.sign(s) * np.sqrt(np.abs(s))
    v_total = np.sqrt(v_z_tot * v_z_tot + v_x * v_x)
    alpha = np.arctan2(v_x, v_z_tot)
    return v_z_tot, v_total, alpha


def stall_blend(alpha, stall_angle, width):
    """Two-sided logistic weight, ~0 in attached flow and ~1 beyond +-stall_angle."""
    m = 1.0 / width
    up = np.exp(np.clip(-m * (alpha - stall_angle), -700.0, 700.0))
    down = np.exp(np.clip(m * (alpha + stall_angle), -700.0, 700.0))
    return (1.0 + up + down) / ((1.0 + up) * (1.0 + down))


def segment_coefficients(alpha, profile: str, params: AeroParams):
    """Lift and drag coefficients, attached-flow polar blended into a flat plate."""
    is_nacelle = np.full(np.shape(alpha), profile == NACA0029)
    c_l, c_d = _coefficients(np.asarray(alpha, dtype=float), is_nacelle, params)
    if np.ndim(alpha) == 0:
        return float(c_l), float(c_d)
    return c_l, c_d


def _coefficients(alpha, is_nacelle, params: AeroParams):
    alpha = np.mod(alpha + math.pi, 2.0 * math.pi) - math.pi

    lift_slope = np.where(is_nacelle, params.nacelle_lift_slope, params.wing_lift_slope)
    cd0 = np.where(is_nacelle, params.nacelle_cd0, params.wing_cd0)
    induced = np.where(is_nacelle, params.nacelle_induced_drag, params.wing_induced_drag)
    stall = np.where(is_nacelle, params.nacelle_stall_angle, params.wing_stall_angle)
    flat_lift = np.where(is_nacelle, params.nacelle_flat_plate_lift, params.wing_flat_plate_lift)
    flat_drag = np.where(is_nacelle, params.nacelle_flat_plate_drag, params.wing_flat_plate_drag)

    sigma = stall_blend(alpha, stall, params.stall_width)
    sin_a, cos_a = np.sin(alpha), np.cos(alpha)

    c_l_attached = lift_slope * alpha
    c_d_attached = cd0 + induced * c_l_attached * c_l_attached
    c_l_flat = flat_lift * 2.0 * sin_a * cos_a
    c_d_flat = flat_drag * 2.0 * sin_a * sin_a

    c_l = (1.0 - sigma) * c_l_attached + sigma * c_l_flat
    c_d = (1.0 - sigma) * c_d_attached + sigma * c_d_flat
    return c_l, c_d


def wrench_batch(
    v_air,
    omega,
    zeta_r,
    zeta_l,
    T_r,
    T_l,
    T_t,
    params: AeroParams,
    geometry: VehicleGeometry,
    layout: SegmentLayout,
    include_propulsion: bool = True,
    include_wing: bool = True,
):
    """Body-frame force and torque about the CoG for N flight conditions at once.

    v_air is the body-frame velocity of the CoG relative to the air (N, 3).
    Returns two (N, 3) arrays.
    """
    v_air = np.atleast_2d(np.asarray(v_air, dtype=float))
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    zeta_r, zeta_l, T_r, T_l, T_t = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (zeta_r, zeta_l, T_r, T_l, T_t))

    cog = cog_in_body(geometry)
    force = np.zeros_like(v_air)
    torque = np.zeros_like(v_air)
    if include_wing:
        force, torque = _wing_batch(v_air, omega, zeta_r, zeta_l, T_r, T_l, params, geometry, layout, cog)

    if include_propulsion:
        f_prop, m_prop = _propulsion_batch(v_air, omega, zeta_r, zeta_l, T_r, T_l, T_t, params, geometry, cog)
        force = force + f_prop
        torque = torque + m_prop
    return force, torque


def _wing_batch(v_air, omega, zeta_r, zeta_l, T_r, T_l, params, geometry, layout, cog):
    r_seg = np.stack([np.zeros_like(layout.y), layout.y, np.zeros_like(layout.y)], axis=1) - cog
    v_seg = v_air[:, None, :] + np.cross(omega[:, None, :], r_seg[None, :, :])

    incidence = 0.5 * params.roll_trim_asymmetry
    zeta = np.where(layout.is_right, zeta_r[:, None] + incidence, zeta_l[:, None] - incidence)
    cos_z, sin_z = np.cos(zeta), np.sin(zeta)

    v_z = v_seg[..., 0] * cos_z + v_seg[..., 2] * sin_z
    v_x = v_seg[..., 0] * sin_z - v_seg[..., 2] * cos_z

    thrust = np.where(layout.is_right, T_r[:, None], T_l[:, None]) * layout.washed
    wash_sq = params.prop_wash_efficiency * 4.0 * np.maximum(thrust, 0.0) / (math.pi * geometry.rho * geometry.D**2)
    v_z_tot, v_total, alpha = _corrected_flow(v_z, v_x, wash_sq)

    c_l, c_d = _coefficients(alpha, np.broadcast_to(layout.is_nacelle, alpha.shape), params)
    # q * area / V, so the unit lift/drag directions need no separate normalization
    scale = 0.5 * geometry.rho * v_total * layout.area
    f_chord = scale * (c_l * v_x - c_d * v_z_tot)
    f_normal = scale * (c_l * v_z_tot + c_d * v_x)

    f_seg = np.stack([f_chord * cos_z - f_normal * sin_z, np.zeros_like(f_chord), f_chord * sin_z + f_normal * cos_z], axis=-1)
    force = f_seg.sum(axis=1)
    torque = np.cross(r_seg[None, :, :], f_seg).sum(axis=1)

    speed = np.linalg.norm(v_air, axis=1, keepdims=True)
    force = force - 0.5 * geometry.rho * params.fuselage_drag_area * speed * v_air
    return force, torque


def _propulsion_batch(v_air, omega, zeta_r, zeta_l, T_r, T_l, T_t, params, geometry, cog):
    r_right = np.array([0.0, -geometry.b, 0.0]) - cog
    r_left = np.array([0.0, geometry.b, 0.0]) - cog
    r_tail = np.array([-geometry.l, 0.0, 0.0]) - cog

    f_right = T_r[:, None] * np.stack([np.cos(zeta_r), np.zeros_like(zeta_r), np.sin(zeta_r)], axis=1)
    f_left = T_l[:, None] * np.stack([np.cos(zeta_l), np.zeros_like(zeta_l), np.sin(zeta_l)], axis=1)

    v_tail = v_air + np.cross(omega, r_tail)
    edgewise = np.hypot(v_tail[:, 0], v_tail[:, 1])
    tail_factor = np.maximum(0.0, 1.0 - params.tail_inflow_sensitivity * edgewise)
    f_tail = np.zeros_like(f_right)
    f_tail[:, 2] = T_t * tail_factor

    force = f_right + f_left + f_tail
    torque = np.cross(r_right, f_right) + np.cross(r_left, f_left) + np.cross(r_tail, f_tail)
    return force, torque


def _air_relative_velocity(state: RigidBodyState, wind) -> np.ndarray:
    return rotate_vector_inverse(state.attitude, np.asarray(state.velocity, dtype=float) - np.asarray(wind, dtype=float))


def wing_wrench(
    state: RigidBodyState,
    cmd: ActuatorCommand,
    wind,
    params: AeroParams,
    geometry: VehicleGeometry,
    segments=None,
):
    """Aerodynamic force and torque of the wing segments and fuselage, body frame, about the CoG."""
    layout = segment_layout(segments) if segments is not None else default_layout(geometry)
    force, torque = wrench_batch(
        _air_relative_velocity(state, wind),
        state.body_rates,
        cmd.zeta_r,
        cmd.zeta_l,
        cmd.T_r,
        cmd.T_l,
        cmd.T_t,
        params,
        geometry,
        layout,
        include_propulsion=False,
    )
    return force[0], torque[0]


def propulsion_wrench(state: RigidBodyState, cmd: ActuatorCommand, wind, params: AeroParams, geometry: VehicleGeometry):
    v_air = np.atleast_2d(_air_relative_velocity(state, wind))
    force, torque = _propulsion_batch(
        v_air,
        np.atleast_2d(state.body_rates),
        np.atleast_1d(cmd.zeta_r),
        np.atleast_1d(cmd.zeta_l),
        np.atleast_1d(cmd.T_r),
        np.atleast_1d(cmd.T_l),
        np.atleast_1d(cmd.T_t),
        params,
        geometry,
        cog_in_body(geometry),
    )
    return force[0], torque[0]


def vehicle_wrench(state, cmd, wind, params, geometry, segments=None):
    f_wing, m_wing = wing_wrench(state, cmd, wind, params, geometry, segments)
    f_prop, m_prop = propulsion_wrench(state, cmd, wind, params, geometry)
    return f_wing + f_prop, m_wing + m_prop


def flow_velocity(flow_speed, flow_angle):
    """Body velocity relative to the air for a tunnel flow hitting the vehicle at flow_angle (positive from below)."""
    flow_speed = np.asarray(flow_speed, dtype=float)
    flow_angle = np.asarray(flow_angle, dtype=float)
    return np.stack([flow_speed * np.cos(flow_angle), np.zeros_like(flow_speed), -flow_speed * np.sin(flow_angle)], axis=-1)


def differential_tilt_slope(
    params: AeroParams,
    geometry: VehicleGeometry,
    airspeed: float = 10.0,
    chi: float = math.radians(15.0),
    thrust: float = 8.0,
    epsilon_max: float = math.radians(3.0),
    n_points: int = 13,
):
    """Roll torque sensitivity to differential tilt at a tunnel condition.

    Returns (|slope| in N*m per degree of 2*epsilon, R^2 of the linear fit).
    """
    epsilon = np.linspace(-epsilon_max, epsilon_max, n_points)
    layout = default_layout(geometry)
    n = len(epsilon)
    _, torque = wrench_batch(
        np.tile(flow_velocity(airspeed, 0.0), (n, 1)),
        np.zeros((n, 3)),
        chi + epsilon,
        chi - epsilon,
        np.full(n, thrust),
        np.full(n, thrust),
        np.zeros(n),
        params,
        geometry,
        layout,
    )
    x = np.degrees(2.0 * epsilon)
    roll = torque[:, 0]
    slope, intercept = np.polyfit(x, roll, 1)
    residual = roll - (slope * x + intercept)
    total = np.sum((roll - roll.mean()) ** 2)
    r_squared = 1.0 - np.sum(residual**2) / total if total > 0.0 else 0.0
    return abs(float(slope)), float(r_squared)


def load_aero_params(path: str) -> AeroParams:
    try:
        with open(path, "rb") as file:
            return _aero_params_adapter.validate_json(file.read())
    except FileNotFoundError:
        logger.error(f"Aero parameter file not found: {path}")
        raise
    except (ValidationError, DomainRangeError) as e:
        logger.error(f"Invalid aero parameter file {path}: {e}")
        raise


def save_aero_params(params: AeroParams, path: str) -> str:
    with open(path, "wb") as file:
        file.write(_aero_params_adapter.dump_json(params, indent=2))
    logger.info(f"Aero parameters written to {path}")
    return path


def parse_aero_params(data: dict) -> AeroParams:
    try:
        return _aero_params_adapter.validate_python(data)
    except ValidationError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except DomainRangeError as e:
        raise HTTPException(status_code=e.status_code, detail=e.message)
