"""Lab settings and run-configuration schema with validation."""

import json
import logging
import re
from pathlib import Path
from typing import ClassVar, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .core.types import ExperimentConfig, GeomTolerance

logger = logging.getLogger(__name__)

ReportFormat = Literal["csv", "json"]


class LabSettings(BaseSettings):
    """Validated lab settings.

    Loads from environment variables with SPBM_ prefix.
    """

    model_config: ClassVar[SettingsConfigDict] = SettingsConfigDict(
        env_prefix="SPBM_", case_sensitive=False
    )

    # Loggings
    log_level: str = Field(
        default="WARNING",
        description="Log level [NOTSET, DEBUG, INFO, WARNING, ERROR, CRITICAL]",
    )

    workers: int = Field(
        default=1, ge=1, le=512, description="Default worker processes for studies"
    )

    # Numerics
    eps_geo: float = Field(
        default=1e-9, gt=0, lt=1e-2, description="Dimensionless geometric tolerance"
    )
    bisection_tol: float = Field(
        default=1e-9, gt=0, lt=1, description="Relative width of threshold brackets"
    )
    max_resamples: int = Field(
        default=10,
        ge=0,
        description="Fresh-stream retries for a replication with an unreliable verdict",
    )
    degeneracy_budget: float = Field(
        default=0.01,
        ge=0,
        le=1,
        description="Resample fraction above which a study report carries a warning",
    )

    output_dir: Path = Field(
        default=Path("./results"), description="Default directory for reports"
    )

    @field_validator("log_level")
    @classmethod
    def check_level(cls, v: str) -> str:
        level = v.upper()
        if level not in {"NOTSET", "DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level '{v}'")
        return level

    @field_validator("output_dir", mode="before")
    @classmethod
    def expand_path(cls, v: str | Path) -> Path:
        """Expand ~ in the output directory."""
        return Path(v).expanduser()

    @property
    def tolerance(self) -> GeomTolerance:
        return GeomTolerance(eps_geo=self.eps_geo)


class OutputConfig(BaseModel):
    """Where and how a study writes its results."""

    model_config: ClassVar[ConfigDict] = ConfigDict(extra="forbid")

    path: Path | None = None
    format: ReportFormat = "csv"
    samples_path: Path | None = Field(
        default=None, description="Raw threshold statistics, one per line"
    )
    witnesses_path: Path | None = Field(
        default=None, description="JSON lines of first-replication witnesses"
    )


class RunConfig(BaseModel):
    """Top-level schema of a run-config file."""

    model_config: ClassVar[ConfigDict] = ConfigDict(extra="forbid")

    experiment: ExperimentConfig
    output: OutputConfig = Field(default_factory=OutputConfig)


class ConfigLoadError(Exception):
    """A run-config file could not be read, parsed or validated.

    Attributes:
        messages: One "path:line:col: message" entry per problem

    """

    def __init__(self, messages: list[str]):
        self.messages = messages
        super().__init__("\n".join(messages))


def _locate_key(text: str, loc: tuple[int | str, ...]) -> tuple[int, int]:
    """Best-effort line/column of the innermost named key of `loc`."""
    for part in reversed(loc):
        if isinstance(part, str):
            match = re.search(rf'"{re.escape(part)}"\s*:', text)
            if match:
                line = text.count("\n", 0, match.start()) + 1
                col = match.start() - text.rfind("\n", 0, match.start())
                return line, col
    return 1, 1


def load_run_config(path: Path) -> RunConfig:
    """Read and validate a JSON run config.

    Raises:
        ConfigLoadError: With line-anchored messages for unreadable files,
            malformed JSON and schema violations (unknown keys included).

    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigLoadError([f"{path}: cannot read config: {e}"]) from e

    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigLoadError([f"{path}:{e.lineno}:{e.colno}: {e.msg}"]) from e

    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        messages = []
        for err in e.errors():
            line, col = _locate_key(text, err["loc"])
            where = ".".join(str(p) for p in err["loc"]) or "<root>"
            messages.append(f"{path}:{line}:{col}: {where}: {err['msg']}")
        logger.debug(f"Config validation failed with {len(messages)} error(s)")
        raise ConfigLoadError(messages) from e
