"""Quaternion algebra and frame helpers.

Conventions used across the package:
    - Hamilton quaternions stored as (w, x, y, z).
    - q_IB rotates body vectors into the inertial frame: v_I = q_IB * v_B * q_IB^-1.
    - Body frame is x forward, y left, z up. Inertial frame is z up.
    - Allocation torques are (roll right-wing-down, pitch nose-up, yaw nose-right),
      i.e. (+x, -y, -z) in body axes.
"""
import numpy as np

from app.core.models import Quaternion

IDENTITY = Quaternion(1.0, 0.0, 0.0, 0.0)
_ALLOCATION_SIGNS = np.array([1.0, -1.0, -1.0])


def quat_normalize(q: Quaternion) -> Quaternion:
    arr = q.as_array()
    norm = np.linalg.norm(arr)
    if norm == 0.0:
        return IDENTITY
    return Quaternion.from_array(arr / norm)


def quat_canonical(q: Quaternion) -> Quaternion:
    # q and -q are the same rotation; keep the w >= 0 hemisphere
    if q.w < 0.0:
        return Quaternion(-q.w, -q.x, -q.y, -q.z)
    return q


def quat_conjugate(q: Quaternion) -> Quaternion:
    return Quaternion(q.w, -q.x, -q.y, -q.z)


def quat_multiply(a: Quaternion, b: Quaternion) -> Quaternion:
    w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z
    x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y
    y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x
    z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w
    return quat_normalize(Quaternion(w, x, y, z))


def quat_from_axis_angle(axis, angle: float) -> Quaternion:
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0.0 or angle == 0.0:
        return IDENTITY
    half = 0.5 * angle
    xyz = axis / norm * np.sin(half)
    return Quaternion(float(np.cos(half)), float(xyz[0]), float(xyz[1]), float(xyz[2]))


def quat_to_matrix(q: Quaternion) -> np.ndarray:
    """Rotation matrix R with v_I = R @ v_B for q = q_IB."""
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R: np.ndarray) -> Quaternion:
    # Shepperd's method, branch on the largest diagonal term
    R = np.asarray(R, dtype=float)
    trace = np.trace(R)
    if trace > 0.0:
        s = 2.0 * np.sqrt(trace + 1.0)
        w = 0.25 * s
        x = (R[2, 1] - R[1, 2]) / s
        y = (R[0, 2] - R[2, 0]) / s
        z = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        w = (R[2, 1] - R[1, 2]) / s
        x = 0.25 * s
        y = (R[0, 1] + R[1, 0]) / s
        z = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        w = (R[0, 2] - R[2, 0]) / s
        x = (R[0, 1] + R[1, 0]) / s
        y = 0.25 * s
        z = (R[1, 2] + R[2, 1]) / s
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        w = (R[1, 0] - R[0, 1]) / s
        x = (R[0, 2] + R[2, 0]) / s
        y = (R[1, 2] + R[2, 1]) / s
        z = 0.25 * s
    return quat_canonical(quat_normalize(Quaternion(w, x, y, z)))


def rotate_vector(q: Quaternion, v) -> np.ndarray:
    """Express body vector v in the frame q rotates into (v_I for q_IB)."""
    v = np.asarray(v, dtype=float)
    u = q.vector
    # v' = v + 2w(u x v) + 2u x (u x v)
    t = 2.0 * np.cross(u, v)
    return v + q.w * t + np.cross(u, t)


def rotate_vector_inverse(q: Quaternion, v) -> np.ndarray:
    return rotate_vector(quat_conjugate(q), v)


def quat_derivative(q: Quaternion, omega) -> np.ndarray:
    """dq/dt = 0.5 q (x) (0, omega) with omega in body axes, returned as (w, x, y, z)."""
    p, r_q, r = (float(c) for c in omega)
    w, x, y, z = q.w, q.x, q.y, q.z
    return 0.5 * np.array(
        [
            -x * p - y * r_q - z * r,
            w * p + y * r - z * r_q,
            w * r_q - x * r + z * p,
            w * r + x * r_q - y * p,
        ]
    )


def quat_from_euler(roll: float, pitch: float, yaw: float) -> Quaternion:
    """ZYX (yaw, pitch, roll) Euler angles to q_IB."""
    cr, sr = np.cos(0.5 * roll), np.sin(0.5 * roll)
    cp, sp = np.cos(0.5 * pitch), np.sin(0.5 * pitch)
    cy, sy = np.cos(0.5 * yaw), np.sin(0.5 * yaw)
    return quat_canonical(
        Quaternion(
            float(cr * cp * cy + sr * sp * sy),
            float(sr * cp * cy - cr * sp * sy),
            float(cr * sp * cy + sr * cp * sy),
            float(cr * cp * sy - sr * sp * cy),
        )
    )


def quat_to_euler(q: Quaternion) -> tuple[float, float, float]:
    w, x, y, z = q.w, q.x, q.y, q.z
    roll = np.arctan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y))
    pitch = np.arcsin(np.clip(2 * (w * y - z * x), -1.0, 1.0))
    yaw = np.arctan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))
    return float(roll), float(pitch), float(yaw)


def body_to_allocation_torque(tau_body) -> np.ndarray:
    return np.asarray(tau_body, dtype=float) * _ALLOCATION_SIGNS


def allocation_to_body_torque(tau_alloc) -> np.ndarray:
    # the map is its own inverse
    return body_to_allocation_torque(tau_alloc)


def cog_in_body(geometry) -> np.ndarray:
    """CoG position relative to the allocation origin S, in body FLU axes."""
    return np.array([geometry.x_offset, -geometry.y_offset, geometry.z_offset])
