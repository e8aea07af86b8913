import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import pandas as pd
from scipy.optimize import approx_fprime, least_squares

from app.api.routes.aero.service import (
    default_layout,
    differential_tilt_slope,
    flow_velocity,
    wrench_batch,
)
from app.api.utils.responses import DomainRangeError, IllConditionedFitError
from app.core.models import AeroParams, SweepSample, ThrustFeedForward, VehicleGeometry
from .schemas import FitOptions, FitResult, NoiseSpec, SweepGrid

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "flow_speed_mps",
    "flow_angle_rad",
    "chi_rad",
    "epsilon_rad",
    "T_r_N",
    "T_l_N",
    "T_t_N",
    "F_x_N",
    "F_y_N",
    "F_z_N",
    "M_x_Nm",
    "M_y_Nm",
    "M_z_Nm",
]
TRIM_COLUMNS = ["chi_rad", "T_col_N"]
CHANNELS = ["F_x", "F_y", "F_z", "M_x", "M_y", "M_z"]
FF_DEGREE = 7
MAX_CONDITION = 1e10
FF_SPAN_TOLERANCE = math.radians(0.5)
FF_HOVER_TOLERANCE = 0.02


@dataclass(frozen=True)
class SweepData:
    """Column arrays of a list of sweep samples."""

    flow_speed: np.ndarray
    flow_angle: np.ndarray
    chi: np.ndarray
    epsilon: np.ndarray
    T_r: np.ndarray
    T_l: np.ndarray
    T_t: np.ndarray
    force: np.ndarray
    torque: np.ndarray

    def __len__(self):
        return len(self.flow_speed)

    @classmethod
    def from_samples(cls, samples) -> "SweepData":
        if isinstance(samples, SweepData):
            return samples
        return cls(
            flow_speed=np.array([s.flow_speed for s in samples]),
            flow_angle=np.array([s.flow_angle for s in samples]),
            chi=np.array([s.chi for s in samples]),
            epsilon=np.array([s.epsilon for s in samples]),
            T_r=np.array([s.T_r for s in samples]),
            T_l=np.array([s.T_l for s in samples]),
            T_t=np.array([s.T_t for s in samples]),
            force=np.array([s.force for s in samples]).reshape(-1, 3),
            torque=np.array([s.torque for s in samples]).reshape(-1, 3),
        )

    def to_samples(self) -> list[SweepSample]:
        return [
            SweepSample(
                flow_speed=float(self.flow_speed[i]),
                flow_angle=float(self.flow_angle[i]),
                chi=float(self.chi[i]),
                epsilon=float(self.epsilon[i]),
                T_r=float(self.T_r[i]),
                T_l=float(self.T_l[i]),
                T_t=float(self.T_t[i]),
                force=tuple(float(v) for v in self.force[i]),
                torque=tuple(float(v) for v in self.torque[i]),
            )
            for i in range(len(self))
        ]


def predict_wrench(params: AeroParams, data: SweepData, geometry: VehicleGeometry):
    """Vehicle wrench at each tunnel condition: level attitude, zero rates, flow from flow_angle."""
    n = len(data)
    return wrench_batch(
        flow_velocity(data.flow_speed, data.flow_angle),
        np.zeros((n, 3)),
        data.chi + data.epsilon,
        data.chi - data.epsilon,
        data.T_r,
        data.T_l,
        data.T_t,
        params,
        geometry,
        default_layout(geometry),
    )


def residuals(
    params: AeroParams,
    samples,
    geometry: VehicleGeometry,
    options: FitOptions | None = None,
) -> np.ndarray:
    """Per-sample (predicted - measured) wrench, forces and torques divided by their channel std."""
    options = options or FitOptions()
    data = SweepData.from_samples(samples)
    if len(data) == 0:
        raise DomainRangeError("Residuals need at least one sample.")
    force, torque = predict_wrench(params, data, geometry)
    weighted = np.hstack([(force - data.force) / options.force_std_N, (torque - data.torque) / options.torque_std_Nm])
    return weighted.ravel()


def generate_synthetic_sweep(
    params: AeroParams,
    grid: SweepGrid,
    noise: NoiseSpec,
    seed: int,
    geometry: VehicleGeometry | None = None,
) -> SweepData:
    geometry = geometry or VehicleGeometry()
    speed, angle, chi, eps = np.meshgrid(
        np.asarray(grid.flow_speeds_mps, dtype=float),
        np.radians(grid.flow_angles_deg),
        np.radians(grid.chi_deg),
        np.radians(grid.epsilon_deg),
        indexing="ij",
    )
    n = speed.size
    index = np.arange(n)
    rotor = np.asarray(grid.rotor_thrust_levels_N, dtype=float)
    tail = np.asarray(grid.tail_thrust_levels_N, dtype=float)
    T_main = rotor[index % len(rotor)]
    T_tail = tail[(index // len(rotor)) % len(tail)]

    data = SweepData(
        flow_speed=speed.ravel(),
        flow_angle=angle.ravel(),
        chi=chi.ravel(),
        epsilon=eps.ravel(),
        T_r=T_main,
        T_l=T_main.copy(),
        T_t=T_tail,
        force=np.zeros((n, 3)),
        torque=np.zeros((n, 3)),
    )
    force, torque = predict_wrench(params, data, geometry)

    rng = np.random.default_rng(seed)
    force = force + rng.normal(0.0, 1.0, force.shape) * (noise.relative * np.abs(force) + noise.absolute_force_N)
    torque = torque + rng.normal(0.0, 1.0, torque.shape) * (noise.relative * np.abs(torque) + noise.absolute_torque_Nm)
    logger.info(f"Synthetic sweep: {n} samples, seed {seed}, relative noise {noise.relative}")
    return SweepData(**{**data.__dict__, "force": force, "torque": torque})


class LevenbergMarquardtFitter:
    """Damped Gauss-Newton with the Nielsen damping update.

    Works on scaled parameters x = p / scale. Only steps that lower the cost are
    accepted, so the recorded cost history is non-increasing.
    """

    def __init__(self, fun, x0, options: FitOptions, free_mask=None):
        self.fun = fun
        self.x = np.array(x0, dtype=float)
        self.options = options
        self.free = np.ones_like(self.x, dtype=bool) if free_mask is None else np.asarray(free_mask, dtype=bool)
        self.cost_history = []
        self.iterations = 0
        self.stop_reason = "max_iterations"
        self.jacobian = None
        self.residual = None

    def cal_jacobian(self, x):
        full = np.atleast_2d(approx_fprime(x, self.fun, self.options.fd_step))
        if full.shape[0] != len(self.residual):
            full = full.T
        return full[:, self.free]

    def cost(self, r):
        return 0.5 * float(r @ r)

    def gradient_cosine(self, J, r) -> float:
        r_norm = np.linalg.norm(r)
        col_norms = np.linalg.norm(J, axis=0)
        if r_norm == 0.0 or J.size == 0:
            return 0.0
        valid = col_norms > 0.0
        if not np.any(valid):
            return 0.0
        return float(np.max(np.abs(J[:, valid].T @ r) / (col_norms[valid] * r_norm)))

    def _try(self, x):
        try:
            return self.fun(x)
        except DomainRangeError:
            return None

    def solve(self):
        opts = self.options
        self.residual = self.fun(self.x)
        F = self.cost(self.residual)
        self.cost_history.append(F)
        J = self.cal_jacobian(self.x)
        A = J.T @ J
        g = J.T @ self.residual
        mu = opts.initial_damping * (np.max(np.diag(A)) if A.size else 1.0)
        nu = 2.0

        while self.iterations < opts.max_iterations:
            if F == 0.0 or np.max(np.abs(g), initial=0.0) < opts.gradient_tolerance:
                self.stop_reason = "gradient"
                break
            h = np.linalg.solve(A + mu * np.eye(len(g)), -g)
            if np.linalg.norm(h) <= opts.step_tolerance * (np.linalg.norm(self.x[self.free]) + opts.step_tolerance):
                self.stop_reason = "step"
                break
            self.iterations += 1

            x_new = self.x.copy()
            x_new[self.free] += h
            r_new = self._try(x_new)
            F_new = self.cost(r_new) if r_new is not None else math.inf
            predicted = 0.5 * float(h @ (mu * h - g))
            gain_ratio = (F - F_new) / predicted if predicted > 0.0 else -1.0

            if gain_ratio > 0.0 and F_new < F:
                self.x, self.residual, F = x_new, r_new, F_new
                self.cost_history.append(F)
                J = self.cal_jacobian(self.x)
                A = J.T @ J
                g = J.T @ self.residual
                mu *= max(1.0 / 3.0, 1.0 - (2.0 * gain_ratio - 1.0) ** 3)
                nu = 2.0
                logger.debug(f"LM iteration {self.iterations}: cost {F:.6g}, damping {mu:.3g}")
            else:
                mu *= nu
                nu *= 2.0
            if not math.isfinite(mu):
                self.stop_reason = "step"
                break

        self.jacobian = J
        return self.x


def _parameter_scale(values: np.ndarray) -> np.ndarray:
    return np.where(np.abs(values) > 1e-6, np.abs(values), 1e-2)


def fit(initial: AeroParams, samples, options: FitOptions | None = None, geometry: VehicleGeometry | None = None) -> FitResult:
    """Least-squares fit of the aero parameters to sweep samples.

    Parameters whose Jacobian column is negligible at the start (or listed in
    options.frozen) stay at their initial values.
    """
    options = options or FitOptions()
    geometry = geometry or VehicleGeometry()
    data = SweepData.from_samples(samples)
    if len(data) == 0:
        raise DomainRangeError("Fit needs at least one sample.")

    names = AeroParams.names()
    p0 = initial.to_vector()
    scale = _parameter_scale(p0)
    target = options.target_roll_slope

    def residual_fun(x):
        params = AeroParams.from_vector(x * scale)
        r = residuals(params, data, geometry, options)
        if target is not None:
            slope, _ = differential_tilt_slope(
                params,
                geometry,
                options.target_airspeed_mps,
                math.radians(options.target_chi_deg),
                options.target_thrust_N,
            )
            r = np.append(r, options.target_weight * (slope - target) / (0.01 * target))
        return r

    x0 = p0 / scale
    r0 = residual_fun(x0)
    J0 = np.atleast_2d(approx_fprime(x0, residual_fun, options.fd_step))
    if J0.shape[0] != len(r0):
        J0 = J0.T
    col_norms = np.linalg.norm(J0, axis=0)
    free = col_norms > options.column_norm_tolerance * max(col_norms.max(), 1e-300)
    for name in options.frozen:
        free[names.index(name)] = False
    frozen = [name for name, is_free in zip(names, free) if not is_free]
    unidentifiable = [name for name in frozen if name not in options.frozen]
    if unidentifiable:
        logger.warning(f"Unidentifiable parameters frozen at initial values: {unidentifiable}")

    fitter = LevenbergMarquardtFitter(residual_fun, x0, options, free)
    x = fitter.solve()
    params = AeroParams.from_vector(x * scale)

    r = fitter.residual
    J = fitter.jacobian
    n_free = int(free.sum())
    dof = max(len(r) - n_free, 1)
    s_squared = float(r @ r) / dof
    covariance = np.zeros((len(names), len(names)))
    if n_free:
        cov_scaled = s_squared * np.linalg.pinv(J.T @ J)
        idx = np.flatnonzero(free)
        covariance[np.ix_(idx, idx)] = cov_scaled * np.outer(scale[idx], scale[idx])
    std = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    std_errors = {name: float(std[i]) for i, name in enumerate(names) if free[i]}
    values = params.to_vector()
    identifiable = [
        name
        for i, name in enumerate(names)
        if free[i] and std[i] <= options.identifiability_threshold * max(abs(values[i]), 1e-12)
    ]

    gradient_norm = fitter.gradient_cosine(J, r)
    converged = fitter.stop_reason == "gradient" or (
        fitter.stop_reason == "step" and gradient_norm <= options.gradient_check
    )

    force, torque = predict_wrench(params, data, geometry)
    errors = np.hstack([force - data.force, torque - data.torque])
    residual_rms = {channel: float(np.sqrt(np.mean(errors[:, k] ** 2))) for k, channel in enumerate(CHANNELS)}

    roll_slope = None
    if target is not None:
        roll_slope, _ = differential_tilt_slope(
            params, geometry, options.target_airspeed_mps, math.radians(options.target_chi_deg), options.target_thrust_N
        )

    result = FitResult(
        params=params,
        residual_rms=residual_rms,
        covariance=covariance,
        std_errors=std_errors,
        iterations=fitter.iterations,
        converged=converged,
        stop_reason=fitter.stop_reason,
        gradient_norm=gradient_norm,
        cost_history=fitter.cost_history,
        frozen=frozen,
        identifiable=identifiable,
        roll_slope=roll_slope,
    )
    logger.info(
        f"Fit finished after {result.iterations} iterations ({result.stop_reason}), converged={result.converged}"
    )
    return result


def suggested_tau_aero_scale(roll_slope: float, geometry: VehicleGeometry, chi: float = math.radians(15.0)) -> float:
    """tau_aero scale that makes the allocation's roll authority match a measured slope at chi.

    The allocation assumes roll = tau_aero(chi) * epsilon * cos(chi) near cruise; the slope is per degree of 2*epsilon.
    """
    per_rad_epsilon = roll_slope * 2.0 * 180.0 / math.pi
    ratio = (chi - 0.5 * math.pi) ** 2 / (geometry.chi_min - 0.5 * math.pi) ** 2
    return per_rad_epsilon / (ratio * math.cos(chi))


def fit_thrust_ff(level_flight_samples, geometry: VehicleGeometry | None = None) -> tuple[float, ...]:
    """Least-squares 7th-order polynomial T_ff(chi) through (chi, T_col) pairs.

    The samples must span [chi_min, pi/2]; the fit must stay positive on that
    interval and reproduce the vehicle weight in hover within 2%.
    """
    geometry = geometry or VehicleGeometry()
    samples = np.asarray(level_flight_samples, dtype=float).reshape(-1, 2)
    chi, thrust = samples[:, 0], samples[:, 1]
    if len(np.unique(chi)) < FF_DEGREE + 1:
        raise DomainRangeError(f"Thrust feed-forward fit needs at least {FF_DEGREE + 1} distinct chi values.")
    if not (np.all(np.isfinite(chi)) and np.all(np.isfinite(thrust))):
        raise DomainRangeError("Trim samples must be finite.")

    condition = np.linalg.cond(np.polynomial.polynomial.polyvander(chi, FF_DEGREE))
    if condition > MAX_CONDITION:
        raise IllConditionedFitError(
            message=f"Vandermonde condition number {condition:.3g} too large; give chi in radians or rescale it."
        )
    if chi.min() > geometry.chi_min + FF_SPAN_TOLERANCE or chi.max() < 0.5 * math.pi - FF_SPAN_TOLERANCE:
        raise DomainRangeError(
            f"Trim samples cover chi in [{math.degrees(chi.min()):.2f}, {math.degrees(chi.max()):.2f}] deg, "
            f"need [{math.degrees(geometry.chi_min):.2f}, 90.00] deg."
        )
    coefficients = np.polynomial.polynomial.polyfit(chi, thrust, FF_DEGREE)

    grid = np.linspace(geometry.chi_min, 0.5 * math.pi, 200)
    if np.any(np.polynomial.polynomial.polyval(grid, coefficients) <= 0.0):
        raise DomainRangeError("Fitted thrust feed-forward is not positive over [chi_min, pi/2].")
    hover = np.polynomial.polynomial.polyval(0.5 * math.pi, coefficients)
    if abs(hover - geometry.weight) > FF_HOVER_TOLERANCE * geometry.weight:
        raise DomainRangeError(f"Fitted hover thrust {hover:.3f} N deviates more than 2% from m*g={geometry.weight:.3f} N.")
    return tuple(float(c) for c in coefficients)


def _level_flight_wrench(v, chi, T_sum, params, geometry, layout):
    force, _ = wrench_batch(
        np.array([[v, 0.0, 0.0]]),
        np.zeros((1, 3)),
        chi,
        chi,
        0.5 * T_sum,
        0.5 * T_sum,
        0.0,
        params,
        geometry,
        layout,
    )
    return force[0]


def trim_level_flight(chi: float, params: AeroParams, geometry: VehicleGeometry, guess=None):
    """Airspeed and total main-rotor thrust for steady level flight at overall tilt chi.

    Returns (airspeed, T_sum, T_col) with T_col = T_sum / sin(chi).
    """
    layout = default_layout(geometry)
    weight = geometry.weight

    def equations(x):
        v, T_sum = x
        force = _level_flight_wrench(v, chi, T_sum, params, geometry, layout)
        return np.array([force[0], force[2] - weight]) / weight

    x0 = np.array(guess if guess is not None else (0.0, weight))
    solution = least_squares(equations, x0, bounds=([0.0, 0.0], [60.0, 4.0 * weight]), xtol=1e-12, ftol=1e-12, gtol=1e-12)
    v, T_sum = solution.x
    if np.max(np.abs(solution.fun)) > 1e-6:
        raise DomainRangeError(f"No level-flight trim found at chi={math.degrees(chi):.2f} deg.")
    return float(v), float(T_sum), float(T_sum / math.sin(chi))


def trim_sweep(chis, params: AeroParams, geometry: VehicleGeometry) -> np.ndarray:
    """Trim from hover toward cruise with continuation; returns rows (chi, airspeed, T_sum, T_col)."""
    rows = []
    guess = None
    for chi in sorted(np.asarray(chis, dtype=float), reverse=True):
        try:
            v, T_sum, T_col = trim_level_flight(float(chi), params, geometry, guess)
        except DomainRangeError as e:
            logger.warning(e.message)
            continue
        guess = (v, T_sum)
        rows.append((float(chi), v, T_sum, T_col))
    return np.array(rows[::-1])


def trim_at_airspeed(airspeed: float, params: AeroParams, geometry: VehicleGeometry, sweep=None):
    """Overall tilt and total thrust for level flight at a given airspeed. Returns (chi, T_sum)."""
    sweep = sweep if sweep is not None else trim_sweep(np.linspace(geometry.chi_min, 0.5 * math.pi, 33), params, geometry)
    chi_guess = float(np.interp(airspeed, sweep[::-1, 1], sweep[::-1, 0]))
    T_guess = float(np.interp(airspeed, sweep[::-1, 1], sweep[::-1, 2]))
    layout = default_layout(geometry)
    weight = geometry.weight

    def equations(x):
        chi, T_sum = x
        force = _level_flight_wrench(airspeed, chi, T_sum, params, geometry, layout)
        return np.array([force[0], force[2] - weight]) / weight

    solution = least_squares(
        equations,
        (chi_guess, T_guess),
        bounds=([geometry.chi_min, 0.0], [0.5 * math.pi, 4.0 * weight]),
        xtol=1e-12,
        ftol=1e-12,
    )
    if np.max(np.abs(solution.fun)) > 1e-6:
        raise DomainRangeError(f"No level-flight trim found at {airspeed:.2f} m/s.")
    return float(solution.x[0]), float(solution.x[1])


@lru_cache(maxsize=16)
def default_thrust_ff(geometry: VehicleGeometry, params: AeroParams) -> ThrustFeedForward:
    """T_ff coefficients fitted to the trim sweep of the given airframe."""
    sweep = trim_sweep(np.linspace(geometry.chi_min, 0.5 * math.pi, 33), params, geometry)
    if len(sweep) < FF_DEGREE + 1:
        raise DomainRangeError(f"Level-flight trim converged at only {len(sweep)} tilt angles, cannot fit T_ff.")
    coefficients = fit_thrust_ff(sweep[:, [0, 3]], geometry)
    logger.info(f"Thrust feed-forward fitted from {len(sweep)} trim points")
    return ThrustFeedForward(coefficients)


def sweep_to_frame(data: SweepData) -> pd.DataFrame:
    return pd.DataFrame(
        np.column_stack([data.flow_speed, data.flow_angle, data.chi, data.epsilon, data.T_r, data.T_l, data.T_t, data.force, data.torque]),
        columns=SWEEP_COLUMNS,
    )


def sweep_from_frame(frame: pd.DataFrame, source: str = "sweep") -> SweepData:
    missing = [c for c in SWEEP_COLUMNS if c not in frame.columns]
    if missing:
        raise DomainRangeError(f"{source} misses columns {missing}.")
    values = frame[SWEEP_COLUMNS].to_numpy(dtype=float)
    if not np.all(np.isfinite(values)) or np.any(values[:, 0] < 0.0):
        raise DomainRangeError(f"{source} holds non-finite values or negative flow speeds.")
    return SweepData(
        flow_speed=values[:, 0],
        flow_angle=values[:, 1],
        chi=values[:, 2],
        epsilon=values[:, 3],
        T_r=values[:, 4],
        T_l=values[:, 5],
        T_t=values[:, 6],
        force=values[:, 7:10],
        torque=values[:, 10:13],
    )


def write_sweep_csv(data: SweepData, path: str) -> str:
    frame = sweep_to_frame(data)
    frame.to_csv(path, index=False, float_format="%.10g")
    logger.info(f"Sweep with {len(frame)} samples written to {path}")
    return path


def read_sweep_csv(path: str) -> SweepData:
    return sweep_from_frame(pd.read_csv(path), f"Sweep file {path}")


def write_trim_csv(sweep: np.ndarray, path: str) -> str:
    pd.DataFrame(sweep[:, [0, 3]], columns=TRIM_COLUMNS).to_csv(path, index=False, float_format="%.10g")
    logger.info(f"Trim sweep written to {path}")
    return path


def read_trim_csv(path: str) -> np.ndarray:
    frame = pd.read_csv(path)
    missing = [c for c in TRIM_COLUMNS if c not in frame.columns]
    if missing:
        raise DomainRangeError(f"Trim file {path} misses columns {missing}.")
    return frame[TRIM_COLUMNS].to_numpy(dtype=float)
