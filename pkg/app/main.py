import logging
import math
from contextlib import asynccontextmanager

import uvicorn
from fastapi import FastAPI

from app.api.routes.aero.router import aero_router
from app.api.routes.allocation.router import allocation_router
from app.api.routes.controller.router import controller_router
from app.api.routes.home.router import home_router
from app.api.routes.reports.router import report_router
from app.api.routes.sim.router import sim_router
from app.api.routes.sysid.router import sysid_router
from app.api.routes.sysid.service import default_thrust_ff
from app.core import settings
from app.core.models import AeroParams, VehicleGeometry


# Basic configuration
logging.basicConfig(
    level=settings.log_level,
    format=settings.LOG_FORMAT,
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    # The default thrust feed-forward needs a trim sweep; fit it once before serving
    ff = default_thrust_ff(VehicleGeometry(), AeroParams())
    logger.info(f"Default thrust feed-forward ready, hover thrust {ff.evaluate(0.5 * math.pi):.2f} N")
    yield


app = FastAPI(lifespan=lifespan)

app.include_router(home_router)
app.include_router(allocation_router)
app.include_router(controller_router)
app.include_router(aero_router)
app.include_router(sim_router)
app.include_router(sysid_router)
app.include_router(report_router)


if __name__ == "__main__":
    uvicorn.run(app="app.main:app", host=settings.service_host, port=settings.service_port)
