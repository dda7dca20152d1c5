# Copyright 2025 John Brosnihan
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Application configuration using pydantic BaseSettings."""

import logging
import os
import re
from functools import lru_cache

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

GRID_PATTERN = re.compile(r"^\s*(\d+)\s*[xX]\s*(\d+)\s*[xX]\s*(\d+)\s*$")


def parse_grid_dimensions(value: str) -> tuple[int, int, int]:
    """Parse a grid string such as ``4x4x8`` into ``(n_x, n_y, n_theta)``.

    Raises:
        ValueError: If the string is not three positive integers separated by ``x``
    """
    match = GRID_PATTERN.match(value)
    if match is None:
        raise ValueError(f"Invalid grid '{value}': expected NXxNYxNTHETA, e.g. 4x4x8")
    dims = tuple(int(group) for group in match.groups())
    if min(dims) < 1:
        raise ValueError(f"Invalid grid '{value}': every dimension must be >= 1")
    return dims  # type: ignore[return-value]


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", case_sensitive=True, extra="ignore"
    )

    # Service configuration
    SERVICE_NAME: str = Field(default="sift-clamp", description="Name of the service for logging")

    PORT: int = Field(default=8080, description="Port for the HTTP API", ge=1, le=65535)

    WORKERS: int = Field(
        default=1,
        description="Number of uvicorn worker processes for the HTTP API.",
        ge=1,
        le=16,
    )

    # Logging configuration
    LOG_LEVEL: str = Field(
        default="INFO",
        description=(
            "Logging level for the application. "
            "Valid values: DEBUG, INFO, WARNING, ERROR, CRITICAL. "
            "Invalid values will fall back to INFO with a warning."
        ),
    )

    # Descriptor configuration
    GRID: str = Field(
        default="4x4x8",
        description="Histogram grid as NXxNYxNTHETA (spatial x, spatial y, orientation bins)",
    )

    PATCH_RADIUS: float = Field(
        default=12.0,
        description="Patch radius in pixels; normalized patches are 2*PATCH_RADIUS wide",
        gt=0,
    )

    GAUSSIAN_SIGMA: float = Field(
        default=0.0,
        description="Scale of the Gaussian window in pixels. 0 uses PATCH_RADIUS.",
        ge=0,
    )

    CLAMP_C: float = Field(default=0.2, description="Lowe clamping parameter c", gt=0, le=1)

    EPSILON: float = Field(
        default=1.0,
        description="A contrario detection budget: a bin is meaningful when its NFA < EPSILON",
        gt=0,
    )

    MAGNIFICATION: float = Field(
        default=3.0,
        description="Measurement region multiplier: the patch radius spans MAGNIFICATION*scale",
        gt=0,
    )

    # Evaluation configuration
    SWEEP_SAMPLES: int = Field(
        default=100,
        description="Number of distance thresholds (and recall positions) in the PR sweep",
        ge=2,
    )

    JOBS: int = Field(default=1, description="Image pairs evaluated concurrently", ge=1, le=64)

    OUTPUT_DIR: str = Field(default="results", description="Directory for benchmark reports")

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate and normalize LOG_LEVEL, falling back to INFO if invalid."""
        valid_levels = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
        normalized = v.upper().strip()

        if normalized not in valid_levels:
            # Use print for validation warnings since logging may not be configured yet
            import sys

            print(
                f"WARNING: Invalid LOG_LEVEL '{v}' provided. "
                f"Must be one of {valid_levels}. Falling back to 'INFO'.",
                file=sys.stderr,
            )
            return "INFO"

        return normalized

    @field_validator("GRID")
    @classmethod
    def validate_grid(cls, v: str) -> str:
        """Reject grid strings that do not parse; store them normalized."""
        n_x, n_y, n_theta = parse_grid_dimensions(v)
        return f"{n_x}x{n_y}x{n_theta}"

    @property
    def grid_dimensions(self) -> tuple[int, int, int]:
        """The configured grid as ``(n_x, n_y, n_theta)``."""
        return parse_grid_dimensions(self.GRID)

    @property
    def effective_sigma(self) -> float:
        """Gaussian window scale, defaulting to the patch radius."""
        return self.GAUSSIAN_SIGMA or self.PATCH_RADIUS

    def model_post_init(self, __context):
        """Warn about settings that are valid but likely unintended."""
        logger = logging.getLogger(__name__)

        cpu_count = os.cpu_count() or 1
        if self.JOBS > cpu_count:
            logger.warning(
                f"JOBS={self.JOBS} exceeds the {cpu_count} available CPUs; "
                "pair evaluations will contend for cores.",
                extra={"jobs": self.JOBS, "cpu_count": cpu_count},
            )


@lru_cache
def get_settings() -> Settings:
    """Get cached application settings singleton."""
    return Settings()
