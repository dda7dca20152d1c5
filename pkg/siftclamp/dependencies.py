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
"""Shared factories turning settings (and per-call overrides) into domain objects.

Both the CLI and the HTTP API build their grids, a contrario configurations and
clamping policies here, so a flag and its environment variable mean the same thing.
"""

import logging

from siftclamp.config import Settings, get_settings, parse_grid_dimensions
from siftclamp.models.acontrario import AContrarioConfig
from siftclamp.models.benchmark import PipelineConfig
from siftclamp.models.descriptor import ClampPolicy, ClampVariant, HistogramGrid

logger = logging.getLogger(__name__)

POLICY_NAMES = tuple(variant.value for variant in ClampVariant)


def get_cached_settings() -> Settings:
    """Cached settings for dependency injection (get_settings is lru-cached)."""
    return get_settings()


def build_grid(settings: Settings, grid: str | None = None) -> HistogramGrid:
    """Histogram grid from GRID / PATCH_RADIUS / GAUSSIAN_SIGMA, or from a grid override."""
    n_x, n_y, n_theta = parse_grid_dimensions(grid) if grid else settings.grid_dimensions
    return HistogramGrid(
        n_x=n_x,
        n_y=n_y,
        n_theta=n_theta,
        lambda_patch=settings.PATCH_RADIUS,
        sigma=settings.effective_sigma,
    )


def build_acontrario_config(settings: Settings, epsilon: float | None = None) -> AContrarioConfig:
    return AContrarioConfig(epsilon=settings.EPSILON if epsilon is None else epsilon)


def parse_policy(name: str, c: float = 0.2) -> ClampPolicy:
    """Clamping policy from its command-line name.

    Raises:
        ValueError: If the name is not one of none, lowe, mc-exact, mc-approx
    """
    normalized = name.strip().lower()
    if normalized not in POLICY_NAMES:
        raise ValueError(f"Unknown policy '{name}': expected one of {', '.join(POLICY_NAMES)}")
    return ClampPolicy(variant=ClampVariant(normalized), c=c)


def parse_policies(names: str, c: float = 0.2) -> list[ClampPolicy]:
    """Comma-separated policy list, in the given order."""
    policies = [parse_policy(name, c) for name in names.split(",") if name.strip()]
    if not policies:
        raise ValueError("at least one policy is required")
    return policies


def build_pipeline(
    settings: Settings,
    policies: list[ClampPolicy],
    grid: str | None = None,
    epsilon: float | None = None,
    magnification: float | None = None,
    sample_count: int | None = None,
) -> PipelineConfig:
    """Pipeline configuration from settings, with any explicit values taking precedence."""
    return PipelineConfig(
        grid=build_grid(settings, grid),
        acontrario=build_acontrario_config(settings, epsilon),
        policies=policies,
        magnification=settings.MAGNIFICATION if magnification is None else magnification,
        sample_count=settings.SWEEP_SAMPLES if sample_count is None else sample_count,
    )
