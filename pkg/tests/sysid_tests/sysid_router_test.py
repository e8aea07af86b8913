import json
import unittest
from unittest.mock import patch

import numpy as np
from fastapi import HTTPException

from app.api.routes.sysid.router import fit_sweep, synthesize, trim
from app.api.routes.sysid.schemas import FitRequestDTO, FitResult, SweepGrid, SynthRequestDTO
from app.core.models import AeroParams


def fake_grid():
    return SweepGrid(flow_speeds_mps=[5.0, 10.0], flow_angles_deg=[0.0, 30.0], chi_deg=[30.0, 90.0], epsilon_deg=[0.0])


def fake_samples():
    body = json.loads(synthesize(SynthRequestDTO(grid=fake_grid())).body.decode("utf-8"))
    return body["samples"]


def fake_result(converged):
    return FitResult(
        params=AeroParams(),
        residual_rms={"F_x": 0.0},
        covariance=np.zeros((26, 26)),
        std_errors={},
        iterations=3,
        converged=converged,
        stop_reason="gradient" if converged else "max_iterations",
        gradient_norm=0.0,
        cost_history=[1.0, 0.5],
    )


def body_of(response):
    return json.loads(response.body.decode("utf-8"))


class SysidRouter_Should(unittest.TestCase):

    def test_synthesize_returnsOneRecordPerGridPoint(self):
        # Act
        response = synthesize(SynthRequestDTO(grid=fake_grid()))

        # Assert
        self.assertEqual(response.status_code, 201)
        body = body_of(response)
        self.assertEqual(len(body["samples"]), 8)
        self.assertIn("F_z_N", body["samples"][0])

    @patch("app.api.routes.sysid.router.fit")
    def test_fit_sweep_returnsConvergedResult(self, mock_fit):
        # Arrange
        mock_fit.return_value = fake_result(True)

        # Act
        response = fit_sweep(FitRequestDTO(samples=fake_samples()))

        # Assert
        self.assertEqual(response.status_code, 200)
        self.assertEqual(body_of(response)["result"]["iterations"], 3)
        self.assertEqual(len(mock_fit.call_args.args[1]), 8)

    @patch("app.api.routes.sysid.router.fit")
    def test_fit_sweep_notConvergedIsServerError(self, mock_fit):
        # Arrange
        mock_fit.return_value = fake_result(False)

        # Act
        with self.assertRaises(HTTPException) as context:
            fit_sweep(FitRequestDTO(samples=fake_samples()))

        # Assert
        self.assertEqual(context.exception.status_code, 500)
        self.assertIn("max_iterations", context.exception.detail)

    def test_fit_sweep_missingColumnsIsBadRequest(self):
        with self.assertRaises(HTTPException) as context:
            fit_sweep(FitRequestDTO(samples=[{"flow_speed_mps": 1.0}]))

        self.assertEqual(context.exception.status_code, 400)

    def test_trim_needsTwoPoints(self):
        with self.assertRaises(HTTPException) as context:
            trim(points=1)

        self.assertEqual(context.exception.status_code, 400)

    def test_trim_listsHoverPointLast(self):
        # Act
        body = body_of(trim(points=5))

        # Assert
        self.assertAlmostEqual(body["trim"][-1]["chi_deg"], 90.0)
        self.assertAlmostEqual(body["trim"][-1]["airspeed_mps"], 0.0, places=4)
