"""
Run configuration for dqpt-lab.

A run is described by one flat set of keys. Files are either ``key = value``
text (``#`` starts a comment) or a flat JSON object; command-line flags
override file values.
"""
import json
import logging
import os
from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.physics.exact import MAX_SITES
from src.physics.model import CouplingSet, QuenchSpec
from src.utils.errors import ConfigError

logger = logging.getLogger("dqpt_lab.config")

COMMANDS = (
    "phase-diagram",
    "rate-function",
    "critical-times",
    "dqpt-scan",
    "entanglement-dynamics",
    "ggm-scan",
    "oracle-check",
)

# commands that honour the engine key
ENGINE_COMMANDS = ("entanglement-dynamics", "ggm-scan")


class RunConfig(BaseModel):
    """
    Configuration model for one dqpt-lab run.

    The third coordinate of a scan plane is taken from the final couplings,
    e.g. ``d_1`` for the lambda1-lambda2 plane.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    command: Literal[COMMANDS]
    gamma: float = 0.8
    lambda1_0: float = 1.5
    lambda2_0: float = 0.0
    d_0: float = 0.0
    lambda1_1: float = 0.0
    lambda2_1: float = 0.2
    d_1: float = 0.0

    n_modes: int = Field(2048, ge=1, le=2 ** 20)
    t_max: float = Field(20.0, gt=0)
    dt: float = Field(0.01, gt=0)
    eps_crit: float = Field(1e-6, gt=0, lt=1)
    tau: float = Field(20.0, gt=0)
    size: int = Field(96, ge=4, le=4096)
    engine: Literal["covariance", "ed"] = "covariance"

    plane: Literal["lambda1-lambda2", "lambda1-d", "lambda2-d"] = "lambda1-lambda2"
    x_min: float = -2.0
    x_max: float = 2.0
    nx: int = Field(21, ge=1, le=401)
    y_min: float = -2.0
    y_max: float = 2.0
    ny: int = Field(21, ge=1, le=401)

    out: Optional[str] = None
    format: Literal["csv", "json"] = "csv"
    threads: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_bounds(self) -> "RunConfig":
        if self.dt > self.t_max:
            raise ConfigError("dt", f"must not exceed t_max={self.t_max!r}, got {self.dt!r}")
        if self.engine == "ed" and self.command in ENGINE_COMMANDS:
            if self.size % 2 or self.size > MAX_SITES:
                raise ConfigError("size", f"engine=ed needs an even size in [4, {MAX_SITES}], got {self.size}")
        elif self.size % 4:
            raise ConfigError("size", f"must be a multiple of 4, got {self.size}")
        return self

    def initial(self) -> CouplingSet:
        return CouplingSet.point(self.gamma, self.lambda1_0, self.lambda2_0, self.d_0)

    def final(self) -> CouplingSet:
        return CouplingSet.point(self.gamma, self.lambda1_1, self.lambda2_1, self.d_1)

    def quench(self) -> QuenchSpec:
        return QuenchSpec(initial=self.initial(), final=self.final())

    def plane_fixed(self) -> float:
        """Value of the coordinate held fixed on ``plane``."""
        missing = {"lambda1-lambda2": self.d_1, "lambda1-d": self.lambda2_1, "lambda2-d": self.lambda1_1}
        return missing[self.plane]


def build_config(values: Dict[str, Any]) -> RunConfig:
    """
    Validate raw key/value pairs.

    Args:
        values: Flat mapping of configuration keys

    Returns:
        RunConfig

    Raises:
        ConfigError: naming the first offending key
    """
    try:
        return RunConfig(**values)
    except ValidationError as e:
        error = e.errors()[0]
        cause = (error.get("ctx") or {}).get("error")
        if isinstance(cause, ConfigError):
            raise cause from e
        key = ".".join(str(part) for part in error.get("loc", ())) or "config"
        raise ConfigError(key, error.get("msg", "invalid value")) from e


def _parse_text(text: str, path: str) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}", f"expected 'key = value' in {path}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {number}", "empty key")
        values[key] = value
    return values


def load_config(path: str) -> Dict[str, Any]:
    """
    Read a flat configuration file.

    Args:
        path: ``.json`` for a JSON object, anything else for ``key = value`` text

    Returns:
        Raw key/value mapping; validate with ``build_config``
    """
    if not os.path.exists(path):
        raise ConfigError("config", f"file not found: {path}")
    with open(path, "r") as f:
        text = f.read()
    if not text.strip():
        raise ConfigError("config", f"empty configuration file: {path}")
    if path.endswith(".json"):
        try:
            values = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"malformed JSON in {path}: {e}") from e
        if not isinstance(values, dict):
            raise ConfigError("config", "top level must be a JSON object")
        for key, value in values.items():
            if isinstance(value, (dict, list)):
                raise ConfigError(key, "nested values are not allowed")
        return values
    return _parse_text(text, path)


def save_config(config: RunConfig, path: str) -> None:
    """
    Write the configuration in the flat text form ``load_config`` reads.

    Args:
        config: Validated configuration
        path: Destination file
    """
    with open(path, "w", newline="\n") as f:
        f.write(dump_config(config))


def dump_config(config: RunConfig) -> str:
    lines = [f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}"
             for key, value in config.model_dump(exclude_none=True).items()]
    return "\n".join(lines) + "\n"
