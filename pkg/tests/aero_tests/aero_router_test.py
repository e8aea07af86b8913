import json
import math
import unittest

from fastapi import HTTPException

from app.api.routes.aero.router import prop_wash, wrench
from app.api.routes.aero.schemas import PropWashRequestDTO, WrenchRequestDTO


def body_of(response):
    return json.loads(response.body.decode("utf-8"))


class AeroRouter_Should(unittest.TestCase):

    def test_wrench_hoverThrustWithoutWingIsWeight(self):
        # Arrange
        request = WrenchRequestDTO(T_r_N=24.525, T_l_N=24.525)

        # Act
        response = wrench(request)

        # Assert
        self.assertEqual(response.status_code, 200)
        body = body_of(response)
        self.assertEqual(len(body["force_N"]), 3)
        self.assertAlmostEqual(body["torque_Nm"][0], 0.0, places=9)
        self.assertGreater(body["force_N"][2], 0.0)

    def test_wrench_appliesParameterOverrides(self):
        # Arrange
        base = WrenchRequestDTO(flow_speed_mps=10.0, chi_deg=10.0, include_propulsion=False)
        draggy = WrenchRequestDTO(flow_speed_mps=10.0, chi_deg=10.0, include_propulsion=False, params={"fuselage_drag_area": 0.5})

        # Act
        base_force = body_of(wrench(base))["force_N"]
        draggy_force = body_of(wrench(draggy))["force_N"]

        # Assert
        self.assertLess(draggy_force[0], base_force[0])

    def test_wrench_rejectsUnknownParameterDomain(self):
        with self.assertRaises(HTTPException):
            wrench(WrenchRequestDTO(params={"stall_width": -1.0}))

    def test_wrenchRequest_rejectsNegativeSpeed(self):
        with self.assertRaises(HTTPException) as context:
            WrenchRequestDTO(flow_speed_mps=-1.0)

        self.assertEqual(context.exception.status_code, 422)

    def test_prop_wash_returnsEffectiveAngleInDegrees(self):
        # Act
        body = body_of(prop_wash(PropWashRequestDTO(v_z_wing_mps=1.0, v_x_wing_mps=1.0, T_N=0.0)))

        # Assert
        self.assertAlmostEqual(body["alpha_effective_deg"], 45.0)
        self.assertAlmostEqual(body["v_total_corrected_mps"], math.sqrt(2.0))

    def test_prop_wash_negativeThrustIsBadRequest(self):
        with self.assertRaises(HTTPException) as context:
            prop_wash(PropWashRequestDTO(v_z_wing_mps=1.0, v_x_wing_mps=1.0, T_N=-2.0))

        self.assertEqual(context.exception.status_code, 400)
