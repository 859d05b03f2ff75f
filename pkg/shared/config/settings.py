"""
Configuration for GeoWeight
Process settings come from the environment (optionally a .env file);
per-run settings are validated by the RunConfig model
"""

import os
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from shared.utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_NSIM = 99

SUBCOMMANDS = ("dist", "gwss", "gwpca", "gwr", "gwr-mixed", "gwr-hetero", "gwda", "bw", "mc", "diag")


class Settings(BaseModel):
    """Process-wide settings read from environment variables"""
    threads: int = Field(default=1, ge=1)
    log_level: str = "INFO"
    log_format: Literal["json", "console"] = "json"
    metrics_file: Optional[str] = None


def load_settings(env_file: Optional[str] = None) -> Settings:
    """Load settings from the environment, reading a .env file first if present"""
    load_dotenv(env_file, override=False)
    try:
        return Settings(
            threads=int(os.getenv('GW_THREADS', '1')),
            log_level=os.getenv('GW_LOG_LEVEL', 'INFO').upper(),
            log_format=os.getenv('GW_LOG_FORMAT', 'json'),
            metrics_file=os.getenv('GW_METRICS_FILE') or None,
        )
    except (ValueError, ValidationError) as e:
        raise ConfigurationError(f"Invalid environment settings: {e}") from e


class RunConfig(BaseModel):
    """One validated command line run"""
    subcommand: Literal["dist", "gwss", "gwpca", "gwr", "gwr-mixed", "gwr-hetero", "gwda", "bw", "mc", "diag"]
    input_path: Path
    x_col: str = "X"
    y_col: str = "Y"

    # variable selections
    variables: List[str] = Field(default_factory=list)
    response: Optional[str] = None
    global_vars: List[str] = Field(default_factory=list)
    intercept_fixed: bool = False
    label_col: Optional[str] = None
    winner_share: Optional[str] = None
    winner: Optional[str] = None

    # weighting scheme
    kernel: Literal["boxcar", "bisquare", "tricube", "gaussian", "exponential"] = "bisquare"
    bandwidth: Union[float, Literal["auto"]] = "auto"
    adaptive: bool = True
    p: float = Field(default=2.0, ge=1.0)
    theta: float = 0.0
    geodesic: bool = False

    # model options
    model: Literal["gwss", "gwpca", "gwr", "gwda"] = "gwr"
    objective: Literal["cv", "aicc"] = "aicc"
    components: Optional[int] = None
    standardize: bool = True
    method: Literal["lda", "qda"] = "qda"
    family: Literal["coefficient", "all"] = "coefficient"

    # inference
    nsim: Optional[int] = Field(default=None, ge=0)
    seed: Optional[int] = None
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    reoptimize: bool = True

    # outputs
    output: Optional[Path] = None
    output_format: Literal["csv", "geojson"] = "csv"
    profile_output: Optional[Path] = None
    profile_grid: Optional[List[float]] = None
    metrics_file: Optional[Path] = None

    @field_validator("bandwidth", mode="before")
    @classmethod
    def _parse_bandwidth(cls, value: Any) -> Any:
        if isinstance(value, str) and value.strip().lower() == "auto":
            return "auto"
        try:
            bw = float(value)
        except (TypeError, ValueError):
            raise ValueError(f"bandwidth must be a positive number or 'auto', got {value!r}")
        if not bw > 0:
            raise ValueError(f"bandwidth must be positive, got {value!r}")
        return bw

    @model_validator(mode="after")
    def _check_consistency(self) -> "RunConfig":
        if self.nsim is None:
            self.nsim = DEFAULT_NSIM if self.subcommand == "mc" else 0
        if self.nsim > 0 and self.seed is None:
            raise ValueError("a seed is required whenever nsim > 0")
        if (self.winner_share is None) != (self.winner is None):
            raise ValueError("--winner-share and --winner must be given together")
        return self

    @property
    def auto_bandwidth(self) -> bool:
        return self.bandwidth == "auto"

    def referenced_columns(self) -> List[str]:
        """Every data column this run needs"""
        cols = list(self.variables) + list(self.global_vars)
        if self.response:
            cols.append(self.response)
        if self.label_col:
            cols.append(self.label_col)
        for name in (self.winner_share, self.winner):
            if name:
                cols.append(name)
        seen: Dict[str, None] = {}
        for c in cols:
            seen.setdefault(c, None)
        return list(seen)

    def summary(self) -> Dict[str, Any]:
        """Plain dict for structured logging"""
        return self.model_dump(mode="json")


def load_run_file(path: Optional[Union[str, Path]]) -> Dict[str, Any]:
    """Read default RunConfig fields from a YAML run file"""
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Run file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Invalid YAML in run file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"Run file {path} must contain a mapping")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def create_run_config(file_defaults: Optional[Dict[str, Any]] = None, **overrides: Any) -> RunConfig:
    """Merge run file defaults with explicit values and validate"""
    values: Dict[str, Any] = dict(file_defaults or {})
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, (list, tuple)) and len(value) == 0 and key in values:
            continue
        values[key] = value
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid run configuration: {e}") from e
