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
"""Request and response bodies of the HTTP API."""

from pydantic import BaseModel, Field


class ClampRequest(BaseModel):
    """Raw histogram bins to clamp, with optional overrides of the configured defaults."""

    bins: list[float] = Field(..., min_length=2, description="Raw (unnormalized) bin masses")
    policy: str = Field(default="mc-approx", description="none, lowe, mc-exact or mc-approx")
    grid: str | None = Field(default=None, description="Grid as NXxNYxNTHETA; default GRID")
    epsilon: float | None = Field(default=None, gt=0, description="Detection budget override")
    c: float | None = Field(default=None, gt=0, le=1, description="Lowe cap override")


class ClampResponse(BaseModel):
    policy: str
    grid: str
    mass: float
    descriptor: list[float] = Field(..., description="Unit descriptor, or all zeros")
    threshold: float | None
    clamped_bins: int
    removed_fraction: float
    saturated: bool
