import math
import unittest

import numpy as np

from app.api.routes.allocation.service import (
    allocate,
    allocate_batch,
    allocation_round_trip,
    reconstruct_batch,
    reconstruct_wrench,
    tau_aero_model,
)
from app.api.utils.responses import AllocationInputError, AllocationSaturationError, DomainRangeError
from app.core.models import AllocationLimits, ControlDemand, VehicleGeometry


def fake_geometry(**overrides):
    return VehicleGeometry(**overrides)


def fake_demand(tau_roll=0.0, tau_pitch=0.0, tau_yaw=0.0, T_col=30.0, chi=0.5 * math.pi):
    return ControlDemand(tau_roll=tau_roll, tau_pitch=tau_pitch, tau_yaw=tau_yaw, T_col=T_col, chi=chi)


class TauAeroModel_Should(unittest.TestCase):

    def test_tau_aero_model_isZeroInHover(self):
        self.assertEqual(tau_aero_model(0.5 * math.pi, fake_geometry()), 0.0)

    def test_tau_aero_model_isScaleAtChiMin(self):
        # Arrange
        geometry = fake_geometry()

        # Act
        result = tau_aero_model(geometry.chi_min, geometry)

        # Assert
        self.assertAlmostEqual(result, 200.0)

    def test_tau_aero_model_isQuarterScaleHalfway(self):
        # Arrange
        geometry = fake_geometry()
        chi = 0.5 * (geometry.chi_min + 0.5 * math.pi)

        # Act
        result = tau_aero_model(chi, geometry)

        # Assert
        self.assertAlmostEqual(result, 50.0)

    def test_tau_aero_model_decreasesTowardHover(self):
        # Arrange
        geometry = fake_geometry()
        chis = np.linspace(geometry.chi_min, 0.5 * math.pi, 50)

        # Act
        values = [tau_aero_model(float(chi), geometry) for chi in chis]

        # Assert
        self.assertTrue(all(b < a for a, b in zip(values, values[1:])))

    def test_tau_aero_model_rejectsChiBelowMinimum(self):
        with self.assertRaises(DomainRangeError):
            tau_aero_model(math.radians(5.0), fake_geometry())

    def test_tau_aero_model_rejectsChiAboveHover(self):
        with self.assertRaises(DomainRangeError):
            tau_aero_model(math.radians(91.0), fake_geometry())


class Allocate_Should(unittest.TestCase):

    def test_allocate_symmetricHoverSplitsThrustEvenly(self):
        # Act
        command = allocate(fake_demand(), fake_geometry())

        # Assert
        self.assertAlmostEqual(command.T_r, 15.0)
        self.assertAlmostEqual(command.T_l, 15.0)
        self.assertAlmostEqual(command.epsilon, 0.0)
        self.assertAlmostEqual(command.T_t, 0.0)
        self.assertFalse(command.saturated)

    def test_allocate_weightTransferRollGivesZeroEpsilonInHover(self):
        # Arrange
        geometry = fake_geometry(y_offset=0.02)
        demand = fake_demand(tau_roll=geometry.g * geometry.m * geometry.y_offset)

        # Act
        command = allocate(demand, geometry)

        # Assert
        self.assertAlmostEqual(command.epsilon, 0.0, places=12)

    def test_allocate_matchesClosedFormAtSixtyDegrees(self):
        # Arrange
        geometry = fake_geometry()
        chi = math.radians(60.0)
        demand = fake_demand(tau_yaw=1.0, T_col=25.0, chi=chi)
        b = 0.75
        s, c = math.sin(chi), math.cos(chi)
        tau_aero = 200.0 * (chi - 0.5 * math.pi) ** 2 / (math.radians(10.0) - 0.5 * math.pi) ** 2
        expected_T_r = (25.0 * b * s - 1.0 * c) / (2.0 * b)
        expected_T_l = (25.0 * b * s + 1.0 * c) / (2.0 * b)
        expected_epsilon = 1.0 * s / (25.0 * b + tau_aero)

        # Act
        command = allocate(demand, geometry)

        # Assert
        self.assertAlmostEqual(command.T_r, expected_T_r, places=12)
        self.assertAlmostEqual(command.T_l, expected_T_l, places=12)
        self.assertAlmostEqual(command.epsilon, expected_epsilon, places=12)
        self.assertAlmostEqual(command.T_t, 0.0, places=12)
        self.assertAlmostEqual(command.zeta_r, chi + expected_epsilon, places=12)
        self.assertAlmostEqual(command.zeta_l, chi - expected_epsilon, places=12)

    def test_allocate_pitchTorqueGoesToTail(self):
        # Arrange
        geometry = fake_geometry()

        # Act
        command = allocate(fake_demand(tau_pitch=1.1), geometry)

        # Assert
        self.assertAlmostEqual(command.T_t, -1.1 / geometry.l)

    def test_allocate_yawInHoverUsesOnlyDifferentialTilt(self):
        # Act
        command = allocate(fake_demand(tau_yaw=0.5), fake_geometry())

        # Assert
        self.assertAlmostEqual(command.T_r, command.T_l)
        self.assertGreater(command.epsilon, 0.0)

    def test_allocate_thrustDifferenceIsAffineInRoll(self):
        # Arrange
        geometry = fake_geometry()
        chi = math.radians(40.0)

        # Act
        diffs = []
        for tau_roll in (-1.0, 0.0, 1.0):
            command = allocate(fake_demand(tau_roll=tau_roll, T_col=30.0, chi=chi), geometry)
            diffs.append(command.T_r - command.T_l)

        # Assert
        self.assertAlmostEqual(diffs[2] - diffs[1], diffs[1] - diffs[0], places=12)

    def test_allocate_clampsNegativeMainThrustWithFlag(self):
        # Act
        command = allocate(fake_demand(tau_roll=20.0, T_col=5.0), fake_geometry())

        # Assert
        self.assertTrue(command.main_clamped)
        self.assertEqual(command.T_r, 0.0)

    def test_allocate_clampsTailThrustWithFlag(self):
        # Arrange
        limits = AllocationLimits(T_t_max=1.0)

        # Act
        command = allocate(fake_demand(tau_pitch=5.0), fake_geometry(), limits)

        # Assert
        self.assertTrue(command.tail_clamped)
        self.assertAlmostEqual(command.T_t, -1.0)

    def test_allocate_floorsDenominatorWithFlag(self):
        # Act
        command = allocate(fake_demand(tau_yaw=0.01, T_col=0.0), fake_geometry())

        # Assert
        self.assertTrue(command.denominator_floored)
        self.assertAlmostEqual(command.epsilon, 0.01 / 0.5)

    def test_allocate_strictRaisesWithFlooredValue(self):
        # Act
        with self.assertRaises(AllocationSaturationError) as context:
            allocate(fake_demand(tau_yaw=0.01, T_col=0.0), fake_geometry(), strict=True)

        # Assert
        self.assertEqual(context.exception.floored_value, 0.5)
        self.assertTrue(context.exception.command.denominator_floored)

    def test_allocate_rejectsNaN(self):
        with self.assertRaises(AllocationInputError):
            allocate(fake_demand(tau_roll=float("nan")), fake_geometry())

    def test_allocate_rejectsNegativeCollective(self):
        with self.assertRaises(DomainRangeError):
            allocate(fake_demand(T_col=-1.0), fake_geometry())

    def test_allocate_rejectsChiOutsideEnvelope(self):
        with self.assertRaises(DomainRangeError):
            allocate(fake_demand(chi=math.radians(5.0)), fake_geometry())


class ReconstructWrench_Should(unittest.TestCase):

    def test_reconstruct_wrench_symmetricHoverGivesCollectiveOnly(self):
        # Arrange
        geometry = fake_geometry()
        command = allocate(fake_demand(), geometry)

        # Act
        torque, collective = reconstruct_wrench(command, geometry, 0.5 * math.pi)

        # Assert
        np.testing.assert_allclose(torque, [0.0, 0.0, 0.0], atol=1e-12)
        self.assertAlmostEqual(collective, 30.0)

    def test_reconstruct_wrench_recoversDemandAtSixtyDegrees(self):
        # Arrange
        geometry = fake_geometry()
        demand = fake_demand(tau_roll=0.3, tau_pitch=-0.2, tau_yaw=1.0, T_col=25.0, chi=math.radians(60.0))

        # Act
        torque, collective = reconstruct_wrench(allocate(demand, geometry), geometry, demand.chi)

        # Assert
        np.testing.assert_allclose(torque, [0.3, -0.2, 1.0], rtol=0.02, atol=0.01)
        self.assertAlmostEqual(collective, 25.0, delta=0.25)

    def test_reconstruct_batch_matchesScalarReconstruction(self):
        # Arrange
        geometry = fake_geometry(x_offset=0.01, z_offset=-0.02)
        tau = np.array([[0.2, 0.1, -0.3], [-0.5, 0.4, 0.2]])
        T_col = np.array([30.0, 45.0])
        chi = np.array([math.radians(70.0), math.radians(25.0)])

        # Act
        alloc = allocate_batch(tau, T_col, chi, geometry)
        tau_batch, collective_batch = reconstruct_batch(alloc, chi, geometry)

        # Assert
        for i in range(2):
            command = allocate(fake_demand(*tau[i], T_col=T_col[i], chi=chi[i]), geometry)
            torque, collective = reconstruct_wrench(command, geometry, chi[i])
            np.testing.assert_allclose(tau_batch[i], torque, atol=1e-12)
            self.assertAlmostEqual(collective_batch[i], collective, places=10)

    def test_allocate_batch_matchesScalarAllocation(self):
        # Arrange
        geometry = fake_geometry(x_offset=0.02, y_offset=0.005, z_offset=-0.01)
        rng = np.random.default_rng(5)
        tau = rng.normal(0.0, 2.0, (200, 3))
        T_col = rng.uniform(5.0, 70.0, 200)
        chi = rng.uniform(geometry.chi_min, 0.5 * math.pi, 200)

        # Act
        alloc = allocate_batch(tau, T_col, chi, geometry)

        # Assert
        for i in range(200):
            command = allocate(fake_demand(*tau[i], T_col=T_col[i], chi=chi[i]), geometry)
            self.assertEqual(bool(alloc["saturated"][i]), command.saturated)
            if command.saturated:
                continue
            self.assertAlmostEqual(alloc["T_r"][i], command.T_r, places=10)
            self.assertAlmostEqual(alloc["T_l"][i], command.T_l, places=10)
            self.assertAlmostEqual(alloc["T_t"][i], command.T_t, places=10)
            self.assertAlmostEqual(alloc["epsilon"][i], command.epsilon, places=12)


class AllocationRoundTrip_Should(unittest.TestCase):

    def test_allocation_round_trip_passesOnDefaultGeometry(self):
        # Act
        report = allocation_round_trip(n_samples=20_000, seed=3)

        # Assert
        self.assertTrue(report["passed"])
        self.assertGreater(report["scored"], 1000)
        self.assertEqual(report["torque_failures"], 0)
        self.assertEqual(report["thrust_failures"], 0)

    def test_allocation_round_trip_passesWithCogOffsets(self):
        # Arrange
        geometry = fake_geometry(x_offset=0.015, y_offset=0.01, z_offset=-0.02)

        # Act
        report = allocation_round_trip(n_samples=20_000, seed=4, geometry=geometry)

        # Assert
        self.assertTrue(report["passed"])
