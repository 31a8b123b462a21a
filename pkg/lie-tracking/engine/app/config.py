import os
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()


def _env_flag(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


class Settings(BaseModel):
    """Process-wide numerical and I/O defaults, read from the environment or a .env file"""
    tau_mem: float = Field(default=1e-9, gt=0)
    check_frames: bool = True
    validate_membership: bool = True
    reproject_every: int = Field(default=100, ge=0)  # 0 disables re-projection
    default_dt: float = Field(default=0.01, gt=0)
    v_max: float = Field(default=1.0, gt=0)
    sigma_min: float = Field(default=1e-4, gt=0)
    output_dir: str = "runs"
    log_level: str = "INFO"


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings(
        tau_mem=float(os.getenv("LIETRACK_TAU_MEM", "1e-9")),
        check_frames=_env_flag("LIETRACK_CHECK_FRAMES", True),
        validate_membership=_env_flag("LIETRACK_VALIDATE", True),
        reproject_every=int(os.getenv("LIETRACK_REPROJECT_EVERY", "100")),
        default_dt=float(os.getenv("LIETRACK_DEFAULT_DT", "0.01")),
        v_max=float(os.getenv("LIETRACK_V_MAX", "1.0")),
        sigma_min=float(os.getenv("LIETRACK_SIGMA_MIN", "1e-4")),
        output_dir=os.getenv("LIETRACK_OUTPUT_DIR", "runs"),
        log_level=os.getenv("LIETRACK_LOG_LEVEL", "INFO").upper(),
    )
