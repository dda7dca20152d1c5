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
"""Threshold table and descriptor clamping endpoints."""

import logging

import numpy as np
from fastapi import APIRouter, Depends, HTTPException, Query, status
from pydantic import ValidationError

from siftclamp.config import Settings
from siftclamp.dependencies import (
    build_acontrario_config,
    build_grid,
    get_cached_settings,
    parse_policy,
)
from siftclamp.exceptions import SiftClampError
from siftclamp.models.acontrario import ThresholdSummary
from siftclamp.models.descriptor import RawDescriptor
from siftclamp.models.http import ClampRequest, ClampResponse
from siftclamp.services import acontrario, descriptor

logger = logging.getLogger(__name__)

router = APIRouter(tags=["thresholds"])


def _unprocessable(e: Exception) -> HTTPException:
    detail = e.errors()[0]["msg"] if isinstance(e, ValidationError) else str(e)
    return HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=detail)


@router.get("/thresholds", response_model=ThresholdSummary)
def get_thresholds(
    mass: float = Query(..., ge=0, description="Total descriptor mass M"),
    grid: str | None = Query(default=None, description="Grid as NXxNYxNTHETA"),
    epsilon: float | None = Query(default=None, gt=0, description="Detection budget"),
    bins: int | None = Query(default=None, ge=2, description="Bin count L (default: grid)"),
    settings: Settings = Depends(get_cached_settings),
) -> ThresholdSummary:
    """
    Exact and closed-form meaningful-clamping thresholds for one mass.

    Returns both thresholds, alpha, the number of tests and the large-deviation
    condition flags, as printed by `sift-clamp thresholds`.

    Raises:
        HTTPException: 422 for malformed grids or out-of-domain arguments
    """
    try:
        summary = acontrario.threshold_summary(
            build_acontrario_config(settings, epsilon), build_grid(settings, grid), mass, bins
        )
    except (SiftClampError, ValidationError, ValueError) as e:
        raise _unprocessable(e) from e
    logger.info(
        "Thresholds computed",
        extra={
            "mass": mass,
            "grid": summary.grid,
            "exact": summary.exact,
            "approx": summary.approx,
        },
    )
    return summary


@router.post("/clamp", response_model=ClampResponse)
def clamp_descriptor(
    request: ClampRequest, settings: Settings = Depends(get_cached_settings)
) -> ClampResponse:
    """
    Clamp one raw descriptor and return the unit result with the cap that was used.

    The number of bins must match the grid (GRID unless overridden).

    Raises:
        HTTPException: 422 for unknown policies, grid mismatches or invalid bins
    """
    try:
        grid = build_grid(settings, request.grid)
        policy = parse_policy(request.policy, settings.CLAMP_C if request.c is None else request.c)
        raw = RawDescriptor.from_bins(np.asarray(request.bins, dtype=np.float64))
        result = descriptor.clamp_with_details(
            raw, policy, build_acontrario_config(settings, request.epsilon), grid
        )
    except (SiftClampError, ValidationError, ValueError) as e:
        raise _unprocessable(e) from e

    logger.info(
        "Descriptor clamped",
        extra={
            "policy": policy.name,
            "mass": raw.mass,
            "threshold": result.threshold,
            "clamped_bins": result.clamped_bins,
        },
    )
    return ClampResponse(
        policy=policy.name,
        grid=grid.label,
        mass=raw.mass,
        descriptor=[float(value) for value in result.descriptor.bins],
        threshold=result.threshold,
        clamped_bins=result.clamped_bins,
        removed_fraction=result.removed_fraction,
        saturated=result.saturated,
    )
