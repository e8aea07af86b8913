# Process-level settings from environment variables
import os

output_dir = os.getenv("TILTWING_OUTPUT_DIR", "output")
log_level = os.getenv("TILTWING_LOG_LEVEL", "INFO")
workers = int(os.getenv("TILTWING_WORKERS", "2"))

service_host = os.getenv("TILTWING_HOST", "127.0.0.1")
service_port = int(os.getenv("TILTWING_PORT", "8000"))

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def ensure_output_dir(path: str | None = None) -> str:
    target = path or output_dir
    os.makedirs(target, exist_ok=True)
    return target
