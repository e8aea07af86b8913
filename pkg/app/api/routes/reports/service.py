import json
import logging
import math
import os

import matplotlib

matplotlib.use("agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from app.api.routes.sim.service import LOG_COLUMNS, level_flight_power_reduction
from app.api.utils.responses import PlotNotSavedError, ScenarioFileError
from app.core.settings import ensure_output_dir

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ["t", "z", "chi", "power_total", "airspeed"]


def read_log_csv(path: str) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        logger.error(f"Log file cannot be read: {path}")
        raise ScenarioFileError(f"Log file {path} cannot be read: {e}")
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise ScenarioFileError(f"Log file {path} misses columns {missing}.")
    return frame


def _save(fig, path: str) -> str:
    try:
        fig.savefig(path, format="svg")
        logger.info(f"Plot saved to {path}")
    except (OSError, ValueError) as e:
        raise PlotNotSavedError(f"Plot cannot be saved to {path}: {e}")
    finally:
        plt.close(fig)
    return path


def power_vs_airspeed(frame: pd.DataFrame, path: str, cruise_airspeed: float = 10.0) -> str:
    """Electrical power over airspeed, colored by the overall tilt, with hover and cruise markers."""
    fig, ax = plt.subplots(figsize=(8, 5))
    points = ax.scatter(frame["airspeed"], frame["power_total"], c=np.degrees(frame["chi"]), cmap="viridis", s=4)
    fig.colorbar(points, ax=ax, label="chi [deg]")

    hover = frame[frame["chi"] >= math.radians(89.9)]
    if not hover.empty:
        ax.axhline(hover["power_total"].median(), color="tab:red", linestyle="--", label="hover")
    near_cruise = frame[(frame["airspeed"] - cruise_airspeed).abs() <= 0.25]
    if not near_cruise.empty:
        ax.scatter(near_cruise["airspeed"], near_cruise["power_total"], color="tab:orange", s=10, label=f"{cruise_airspeed:g} m/s")

    ax.set_xlabel("airspeed [m/s]")
    ax.set_ylabel("power [W]")
    ax.set_title("Power over airspeed")
    ax.legend(loc="best")
    fig.tight_layout()
    return _save(fig, path)


def transition_profile(frame: pd.DataFrame, path: str) -> str:
    """Altitude, airspeed and tilt over time."""
    fig, axes = plt.subplots(3, 1, figsize=(8, 8), sharex=True)
    axes[0].plot(frame["t"], frame["z"])
    axes[0].set_ylabel("altitude [m]")
    axes[1].plot(frame["t"], frame["airspeed"])
    axes[1].set_ylabel("airspeed [m/s]")
    axes[2].plot(frame["t"], np.degrees(frame["chi"]))
    axes[2].set_ylabel("chi [deg]")
    axes[2].set_xlabel("t [s]")
    fig.tight_layout()
    return _save(fig, path)


def power_over_time(frame: pd.DataFrame, path: str) -> str:
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(frame["t"], frame["power_total"])
    ax.set_xlabel("t [s]")
    ax.set_ylabel("power [W]")
    fig.tight_layout()
    return _save(fig, path)


def power_summary(frame: pd.DataFrame, cruise_airspeed: float = 10.0) -> dict:
    """Trimmed hover and level-flight power at cruise_airspeed, next to what the log recorded."""
    model = level_flight_power_reduction(cruise_airspeed)
    hover = frame.loc[frame["chi"] >= math.radians(89.9), "power_total"]
    near_cruise = frame.loc[(frame["airspeed"] - cruise_airspeed).abs() <= 0.25, "power_total"]
    return {
        "cruise_airspeed_mps": cruise_airspeed,
        "cruise_chi_deg": model["chi_deg"],
        "hover_power_W": model["hover_power_W"],
        "cruise_power_W": model["cruise_power_W"],
        "power_reduction_pct": model["power_reduction_pct"],
        "logged_hover_power_W": float(hover.median()) if not hover.empty else None,
        "logged_cruise_power_W": float(near_cruise.median()) if not near_cruise.empty else None,
    }


def generate_report(log_path: str, output_dir: str | None = None, cruise_airspeed: float = 10.0) -> dict:
    frame = read_log_csv(log_path)
    target = ensure_output_dir(output_dir or os.path.dirname(os.path.abspath(log_path)))
    stem = os.path.splitext(os.path.basename(log_path))[0]

    files = {
        "power_vs_airspeed": power_vs_airspeed(frame, os.path.join(target, f"{stem}_power_vs_airspeed.svg"), cruise_airspeed),
        "transition_profile": transition_profile(frame, os.path.join(target, f"{stem}_transition_profile.svg")),
        "power_over_time": power_over_time(frame, os.path.join(target, f"{stem}_power_over_time.svg")),
    }
    extra = [c for c in frame.columns if c not in LOG_COLUMNS]
    if extra:
        logger.warning(f"Log file {log_path} has unknown columns {extra}")

    summary = {"log": log_path, "plots": files, "rows": len(frame), **power_summary(frame, cruise_airspeed)}
    summary_path = os.path.join(target, f"{stem}_report.json")
    with open(summary_path, "w") as file:
        json.dump(summary, file, indent=2)
    summary["summary"] = summary_path
    return summary
