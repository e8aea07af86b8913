from pydantic import BaseModel


class ReportRequestDTO(BaseModel):
    log_path: str
    output_dir: str | None = None
    cruise_airspeed_mps: float = 10.0
