import math
import os
import tempfile
import unittest

import numpy as np

from app.api.routes.sim.schemas import (
    InitialConditions,
    PowerConfig,
    ScenarioFile,
    SensorNoise,
    SimConfig,
    TimelinePoint,
    WindConfig,
)
from app.api.routes.sim.service import (
    LOG_COLUMNS,
    RigidBodyModel,
    TimeSeriesLog,
    level_flight_power_reduction,
    load_scenario,
    rotor_power,
    run_scenario,
    setpoint_at,
    step_actuators,
    step_physics,
    summarize,
    total_power,
)
from app.api.utils.responses import DomainRangeError, ScenarioFileError, SimulationDivergenceError
from app.core.mathcore import IDENTITY, quat_from_axis_angle, quat_to_matrix
from app.core.models import ActuatorCommand, ActuatorLimits, ActuatorState, AeroParams, RigidBodyState, ThrustFeedForward, VehicleGeometry


def fake_ff():
    return ThrustFeedForward((49.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0))


def fake_actuators(T_r=0.0, T_l=0.0, T_t=0.0, zeta=0.5 * math.pi, limits=None):
    return ActuatorState(T_r, T_l, T_t, zeta, zeta, limits or ActuatorLimits())


def fake_state(velocity=(0.0, 0.0, 0.0), body_rates=(0.0, 0.0, 0.0), attitude=IDENTITY, z=100.0):
    return RigidBodyState(
        position=np.array([0.0, 0.0, z]),
        velocity=np.array(velocity, dtype=float),
        attitude=attitude,
        body_rates=np.array(body_rates, dtype=float),
        inertia=VehicleGeometry().inertia_matrix,
    )


def fake_scenario(duration_s=0.2, **sim_overrides):
    return ScenarioFile(name="unit", sim=SimConfig(duration_s=duration_s, **sim_overrides))


def fake_row(**values):
    row = dict.fromkeys(LOG_COLUMNS, 0.0)
    row.update(values)
    return [row[name] for name in LOG_COLUMNS]


def coast(state, dt, steps, integrator="rk4"):
    for _ in range(steps):
        state = step_physics(state, fake_actuators(), [0.0, 0.0, 0.0], AeroParams(), VehicleGeometry(), dt, integrator, aero_enabled=False)
    return state


class StepPhysics_Should(unittest.TestCase):

    def test_step_physics_freeFallGainsGravityTimesDt(self):
        # Arrange
        state = fake_state()

        # Act
        result = coast(state, 0.001, 1)

        # Assert
        self.assertAlmostEqual(result.velocity[2], -9.81 * 0.001, places=12)
        self.assertAlmostEqual(result.position[2], 100.0 - 0.5 * 9.81 * 0.001**2, places=12)
        np.testing.assert_allclose(result.body_rates, [0.0, 0.0, 0.0])

    def test_step_physics_spinAboutPrincipalAxisStaysConstant(self):
        # Arrange
        state = fake_state(body_rates=(0.0, 0.0, 1.0))

        # Act
        result = coast(state, 0.001, 1000)

        # Assert
        np.testing.assert_allclose(result.body_rates, [0.0, 0.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(
            quat_to_matrix(result.attitude), quat_to_matrix(quat_from_axis_angle([0.0, 0.0, 1.0], 1.0)), atol=1e-9
        )

    def test_step_physics_conservesEnergyAndAngularMomentumInFreeFall(self):
        # Arrange
        inertia = VehicleGeometry().inertia_matrix
        mass = VehicleGeometry().m
        state = fake_state(velocity=(3.0, -1.0, 0.0), body_rates=(0.8, -0.5, 1.2), z=600.0)

        def translational(s):
            return 0.5 * mass * s.velocity @ s.velocity + mass * 9.81 * s.position[2]

        def rotational(s):
            return 0.5 * s.body_rates @ inertia @ s.body_rates

        def momentum(s):
            return np.linalg.norm(inertia @ s.body_rates)

        # Act
        result = coast(state, 0.001, 10_000)

        # Assert
        self.assertLess(abs(rotational(result) / rotational(state) - 1.0), 1e-6)
        self.assertLess(abs(momentum(result) / momentum(state) - 1.0), 1e-6)
        self.assertLess(abs(translational(result) / translational(state) - 1.0), 1e-6)
        self.assertAlmostEqual(result.attitude.norm(), 1.0, places=12)

    def test_step_physics_sharedModelMatchesFreshModel(self):
        # Arrange
        state = fake_state(velocity=(6.0, 0.5, -0.5), body_rates=(0.2, -0.1, 0.05))
        act = fake_actuators(18.0, 17.0, 2.0, math.radians(50.0))
        model = RigidBodyModel(AeroParams(), VehicleGeometry(), state.inertia)

        # Act
        fresh = step_physics(state, act, [1.0, 0.0, 0.0], AeroParams(), VehicleGeometry(), 0.001)
        shared = step_physics(state, act, [1.0, 0.0, 0.0], AeroParams(), VehicleGeometry(), 0.001, model=model)
        advanced = model.advance(state.as_vector(), act, [1.0, 0.0, 0.0], 0.001)

        # Assert
        np.testing.assert_array_equal(shared.as_vector(), fresh.as_vector())
        np.testing.assert_array_equal(advanced, fresh.as_vector())

    def test_rigid_body_model_derivativeUsesBodyToInertialRotation(self):
        # Arrange
        model = RigidBodyModel(AeroParams(), VehicleGeometry())
        x = fake_state(attitude=quat_from_axis_angle([0.0, 1.0, 0.0], -0.5 * math.pi)).as_vector()

        # Act
        dx = model.derivative(x, np.array([49.05, 0.0, 0.0]), np.zeros(3))

        # Assert
        np.testing.assert_allclose(dx[3:6], [0.0, 0.0, 0.0], atol=1e-12)

    def test_step_physics_eulerAgreesWithRk4OverShortHorizon(self):
        # Arrange
        state = fake_state(velocity=(1.0, 0.0, 0.0), body_rates=(0.3, 0.2, -0.1))

        # Act
        rk4 = coast(state, 0.001, 100)
        euler = coast(state, 0.001, 100, integrator="euler")

        # Assert
        np.testing.assert_allclose(euler.position, rk4.position, atol=1e-3)
        np.testing.assert_allclose(euler.body_rates, rk4.body_rates, atol=1e-3)

    def test_step_physics_stageWrenchMatchesHeldWrenchForSmallSteps(self):
        # Arrange
        state = fake_state(velocity=(8.0, 0.0, -1.0), body_rates=(0.1, 0.0, 0.0))
        act = fake_actuators(15.0, 15.0, 0.0, math.radians(40.0))

        # Act
        held = step_physics(state, act, [0.0, 0.0, 0.0], AeroParams(), VehicleGeometry(), 0.001)
        staged = step_physics(state, act, [0.0, 0.0, 0.0], AeroParams(), VehicleGeometry(), 0.001, wrench_hold="stage")

        # Assert
        np.testing.assert_allclose(staged.velocity, held.velocity, atol=1e-5)

    def test_step_physics_hoverThrustHoldsVehicle(self):
        # Arrange
        state = fake_state()
        act = fake_actuators(24.525, 24.525)

        # Act
        result = step_physics(state, act, [0.0, 0.0, 0.0], AeroParams(), VehicleGeometry(), 0.001, aero_enabled=False)

        # Assert
        np.testing.assert_allclose(result.velocity, [0.0, 0.0, 0.0], atol=1e-12)

    def test_step_physics_rejectsNonPositiveDt(self):
        with self.assertRaises(DomainRangeError):
            step_physics(fake_state(), fake_actuators(), [0.0, 0.0, 0.0], AeroParams(), VehicleGeometry(), 0.0)

    def test_step_physics_rejectsUnknownIntegrator(self):
        with self.assertRaises(DomainRangeError):
            step_physics(fake_state(), fake_actuators(), [0.0, 0.0, 0.0], AeroParams(), VehicleGeometry(), 0.001, "midpoint")

    def test_step_physics_flagsRunawayBodyRate(self):
        with self.assertRaises(SimulationDivergenceError):
            step_physics(fake_state(body_rates=(60.0, 0.0, 0.0)), fake_actuators(), [0.0, 0.0, 0.0], AeroParams(), VehicleGeometry(), 0.001, aero_enabled=False)


class StepActuators_Should(unittest.TestCase):

    def test_step_actuators_keepsSettledState(self):
        # Arrange
        act = fake_actuators(10.0, 12.0, 1.0)
        cmd = act.as_command()

        # Act
        result = step_actuators(act, cmd, 0.001)

        # Assert
        self.assertAlmostEqual(result.T_r, 10.0)
        self.assertAlmostEqual(result.T_l, 12.0)
        self.assertAlmostEqual(result.zeta_r, 0.5 * math.pi)

    def test_step_actuators_reachesSixtyThreePercentAfterOneTimeConstant(self):
        # Arrange
        act = fake_actuators()
        cmd = ActuatorCommand(T_r=10.0, T_l=10.0, T_t=0.0, chi=0.5 * math.pi, epsilon=0.0)

        # Act
        for _ in range(50):
            act = step_actuators(act, cmd, 0.001)

        # Assert
        self.assertAlmostEqual(act.T_r, 10.0 * (1.0 - math.exp(-1.0)), places=9)

    def test_step_actuators_slewsTiltAtServoRate(self):
        # Arrange
        act = fake_actuators()
        cmd = ActuatorCommand(T_r=0.0, T_l=0.0, T_t=0.0, chi=0.5 * math.pi, epsilon=math.radians(20.0))

        # Act
        result = step_actuators(act, cmd, 0.01)

        # Assert
        self.assertAlmostEqual(math.degrees(result.zeta_r - act.zeta_r), 1.2)
        self.assertAlmostEqual(math.degrees(result.zeta_l - act.zeta_l), -1.2)

    def test_step_actuators_clampsThrust(self):
        # Arrange
        act = fake_actuators(29.9, 29.9)
        cmd = ActuatorCommand(T_r=60.0, T_l=60.0, T_t=0.0, chi=0.5 * math.pi, epsilon=0.0)

        # Act
        result = step_actuators(act, cmd, 0.05)

        # Assert
        self.assertEqual(result.T_r, 30.0)


class Power_Should(unittest.TestCase):

    def test_rotor_power_growsWithThrust(self):
        # Arrange
        geometry = VehicleGeometry()
        thrust = np.linspace(0.0, 30.0, 31)

        # Act
        result = rotor_power(thrust, geometry.disc_area, geometry.rho)

        # Assert
        self.assertEqual(result[0], 0.0)
        self.assertTrue(np.all(np.diff(result) > 0.0))

    def test_rotor_power_ignoresThrustSign(self):
        self.assertEqual(rotor_power(-4.0, 0.03, 1.225), rotor_power(4.0, 0.03, 1.225))

    def test_total_power_hoverIsCloseToIdealInducedPower(self):
        # Arrange
        geometry = VehicleGeometry()
        T = 0.5 * geometry.weight
        ideal = geometry.weight * math.sqrt(T / (2.0 * geometry.rho * geometry.disc_area))

        # Act
        result = total_power(fake_actuators(T, T), geometry)

        # Assert
        self.assertGreater(result, ideal)
        self.assertLess(result, 1.2 * ideal)

    def test_total_power_followsEfficiency(self):
        # Arrange
        geometry = VehicleGeometry()
        act = fake_actuators(20.0, 20.0)

        # Act
        ideal = total_power(act, geometry, PowerConfig(eta_prop=1.0, k_profile_WpN=0.0))
        lossy = total_power(act, geometry, PowerConfig(eta_prop=0.5, k_profile_WpN=0.0))

        # Assert
        self.assertAlmostEqual(lossy, 2.0 * ideal)

    def test_level_flight_power_reduction_savesAtLeastFifthAtTenMetersPerSecond(self):
        # Act
        report = level_flight_power_reduction(10.0)

        # Assert
        self.assertLess(report["chi_deg"], 90.0)
        self.assertLess(report["cruise_thrust_N"], report["hover_thrust_N"])
        self.assertGreaterEqual(report["power_reduction_pct"], 20.0)


class Timeline_Should(unittest.TestCase):

    def test_setpoint_at_interpolatesBetweenPoints(self):
        # Arrange
        timeline = [TimelinePoint(t_s=0.0, chi_deg=90.0), TimelinePoint(t_s=10.0, chi_deg=20.0, roll_deg=10.0)]

        # Act
        result = setpoint_at(timeline, 5.0)

        # Assert
        self.assertAlmostEqual(result["chi_deg"], 55.0)
        self.assertAlmostEqual(result["roll_deg"], 5.0)

    def test_setpoint_at_holdsLastPoint(self):
        # Arrange
        timeline = [TimelinePoint(t_s=0.0, chi_deg=90.0), TimelinePoint(t_s=10.0, chi_deg=20.0)]

        # Act / Assert
        self.assertAlmostEqual(setpoint_at(timeline, 25.0)["chi_deg"], 20.0)

    def test_wind_at_peaksHalfwayThroughGust(self):
        # Arrange
        wind = WindConfig(constant_mps=(1.0, 0.0, 0.0), gust_mps=(0.0, 4.0, 0.0), gust_start_s=2.0, gust_duration_s=2.0)

        # Act / Assert
        np.testing.assert_allclose(wind.at(3.0), [1.0, 4.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(wind.at(5.0), [1.0, 0.0, 0.0])


class Summary_Should(unittest.TestCase):

    def test_summarize_comparesCruiseAgainstHoverPower(self):
        # Arrange
        log = TimeSeriesLog("synthetic")
        log.append(fake_row(t=0.0, z=10.0, chi=0.5 * math.pi, power_total=400.0))
        log.append(fake_row(t=1.0, z=10.2, chi=math.radians(15.0), power_total=280.0, airspeed=11.0, saturated=1.0))
        log.append(fake_row(t=2.0, z=9.9, chi=math.radians(15.0), power_total=280.0, airspeed=12.0))

        # Act
        summary = summarize(log, z_ref=10.0, chi_min_cmd=math.radians(15.0))

        # Assert
        self.assertAlmostEqual(summary["power_reduction_pct"], 30.0)
        self.assertAlmostEqual(summary["altitude_drift_m"], 0.1)
        self.assertAlmostEqual(summary["max_altitude_error_m"], 0.2)
        self.assertEqual(summary["airspeed_at_min_chi_mps"], 12.0)
        self.assertEqual(summary["saturated_ticks"], 1)
        self.assertFalse(summary["diverged"])

    def test_summarize_hoverOnlyHasNoCruisePower(self):
        # Arrange
        log = TimeSeriesLog("hover")
        log.append(fake_row(chi=0.5 * math.pi, power_total=380.0, z=10.0))

        # Act
        summary = summarize(log, 10.0, 0.5 * math.pi)

        # Assert
        self.assertIsNone(summary["cruise_power_W"])
        self.assertIsNone(summary["power_reduction_pct"])

    def test_time_series_log_writesCsvWithAllColumns(self):
        # Arrange
        log = TimeSeriesLog("csv")
        log.append(fake_row(t=0.0))

        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "log.csv")

            # Act
            log.to_csv(path)
            with open(path) as file:
                header = file.readline().strip().split(",")

        # Assert
        self.assertEqual(header, LOG_COLUMNS)


class RunScenario_Should(unittest.TestCase):

    def test_run_scenario_logsOneRowPerControlTick(self):
        # Act
        log = run_scenario(fake_scenario(0.2), ff=fake_ff())

        # Assert
        self.assertEqual(len(log), 41)
        self.assertAlmostEqual(log.frame["t"].iloc[-1], 0.2)
        self.assertEqual(log.summary["ticks"], 41)

    def test_run_scenario_isDeterministicForSeed(self):
        # Arrange
        noise = SensorNoise(gyro_std_rps=0.01, attitude_std_rad=0.002, position_std_m=0.01)
        scenario = fake_scenario(0.2, noise=noise, seed=11)

        # Act
        first = run_scenario(scenario, ff=fake_ff()).frame
        second = run_scenario(scenario, ff=fake_ff()).frame

        # Assert
        self.assertTrue(first.equals(second))

    def test_run_scenario_halvingPhysicsStepBarelyMovesEndState(self):
        # Arrange
        initial = InitialConditions(velocity_mps=(1.0, 0.0, 0.5), roll_deg=3.0)
        coarse = fake_scenario(1.0, dt_physics_s=0.001, initial=initial)
        fine = fake_scenario(1.0, dt_physics_s=0.0005, initial=initial)
        columns = LOG_COLUMNS[1:14]

        # Act
        end_coarse = run_scenario(coarse, ff=fake_ff()).frame[columns].iloc[-1].to_numpy()
        end_fine = run_scenario(fine, ff=fake_ff()).frame[columns].iloc[-1].to_numpy()

        # Assert
        self.assertLess(np.linalg.norm(end_fine - end_coarse) / np.linalg.norm(end_fine), 1e-3)

    def test_run_scenario_reportsDivergenceWithPartialLog(self):
        # Arrange
        scenario = fake_scenario(1.0, initial=InitialConditions(body_rates_dps=(3000.0, 0.0, 0.0)))

        # Act
        with self.assertRaises(SimulationDivergenceError) as context:
            run_scenario(scenario, ff=fake_ff())

        # Assert
        self.assertTrue(context.exception.message.startswith("t=0.000 s:"))
        self.assertEqual(len(context.exception.log), 1)
        self.assertTrue(context.exception.log.summary["diverged"])

    def test_run_scenario_missingParamsFileIsScenarioError(self):
        # Arrange
        scenario = ScenarioFile(aero_params_file="missing.json")

        # Act / Assert
        with self.assertRaises(ScenarioFileError):
            run_scenario(scenario, base_dir=tempfile.gettempdir())

    def test_run_scenario_usesScenarioThrustCoefficients(self):
        # Arrange
        coefficients = (40.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        scenario = ScenarioFile(thrust_ff_coefficients=coefficients, altitude={"enabled": False}, sim=SimConfig(duration_s=0.01))

        # Act
        log = run_scenario(scenario)

        # Assert
        self.assertAlmostEqual(log.frame["T_col"].iloc[0], 40.0)


class LoadScenario_Should(unittest.TestCase):

    def write(self, directory, text):
        path = os.path.join(directory, "scenario.toml")
        with open(path, "w") as file:
            file.write(text)
        return path

    def test_load_scenario_readsTimeline(self):
        with tempfile.TemporaryDirectory() as directory:
            # Arrange
            path = self.write(directory, 'name = "x"\n[[sim.timeline]]\nt_s = 0.0\nchi_deg = 60.0\n')

            # Act
            scenario = load_scenario(path)

        # Assert
        self.assertEqual(scenario.name, "x")
        self.assertEqual(scenario.sim.timeline[0].chi_deg, 60.0)

    def test_load_scenario_missingFileIsScenarioError(self):
        with self.assertRaises(ScenarioFileError):
            load_scenario("/nonexistent/scenario.toml")

    def test_load_scenario_brokenTomlIsScenarioError(self):
        with tempfile.TemporaryDirectory() as directory:
            path = self.write(directory, "name = \n")

            with self.assertRaises(ScenarioFileError):
                load_scenario(path)

    def test_load_scenario_tiltBelowEnvelopeIsScenarioError(self):
        with tempfile.TemporaryDirectory() as directory:
            path = self.write(directory, "[[sim.timeline]]\nt_s = 0.0\nchi_deg = 5.0\n")

            with self.assertRaises(ScenarioFileError):
                load_scenario(path)

    def test_load_scenario_unsortedTimelineIsScenarioError(self):
        with tempfile.TemporaryDirectory() as directory:
            path = self.write(directory, "[[sim.timeline]]\nt_s = 2.0\n[[sim.timeline]]\nt_s = 1.0\n")

            with self.assertRaises(ScenarioFileError):
                load_scenario(path)

    def test_load_scenario_physicsStepMustDivideControlPeriod(self):
        with tempfile.TemporaryDirectory() as directory:
            path = self.write(directory, "[sim]\ndt_physics_s = 0.003\n")

            with self.assertRaises(ScenarioFileError):
                load_scenario(path)
