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
"""Descriptor domain types: histogram grid, patches, gradients and descriptors.

Array-valued fields hold numpy arrays; pydantic validates their shape and
content in model validators. Instances are frozen, and the arrays they hold
are made read-only, so a descriptor can be shared between threads.
"""

import math
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

MASS_RELATIVE_TOLERANCE = 1e-9
UNIT_NORM_TOLERANCE = 1e-9


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class HistogramGrid(BaseModel):
    """The bin lattice: n_x * n_y spatial cells times n_theta orientation bins.

    Spatial bin centers are evenly spaced over [-lambda_patch, lambda_patch]
    (cell width 2*lambda_patch/n); orientation centers sit at 2*pi*k/n_theta.
    The orientation axis is circular, the spatial axes are not.
    """

    model_config = ConfigDict(frozen=True)

    n_x: int = Field(default=4, ge=1, description="Spatial bins along x")
    n_y: int = Field(default=4, ge=1, description="Spatial bins along y")
    n_theta: int = Field(default=8, ge=1, description="Orientation bins")
    lambda_patch: float = Field(default=12.0, gt=0, description="Patch radius in pixels")
    sigma: float | None = Field(
        default=None, gt=0, description="Gaussian window scale in pixels (default lambda_patch)"
    )

    @model_validator(mode="before")
    @classmethod
    def default_sigma(cls, data):
        """Use the patch radius as the Gaussian scale when none is given."""
        if isinstance(data, dict) and data.get("sigma") is None:
            data = {**data, "sigma": data.get("lambda_patch", 12.0)}
        return data

    @property
    def bin_count(self) -> int:
        """L, the number of histogram bins."""
        return self.n_x * self.n_y * self.n_theta

    @property
    def bin_probability(self) -> float:
        """p = 1/L, the per-bin probability under the uniform background model."""
        return 1.0 / self.bin_count

    @property
    def patch_side(self) -> int:
        """Side of the normalized patch in pixels (2 * lambda_patch at unit sampling)."""
        return max(1, int(round(2.0 * self.lambda_patch)))

    @property
    def shape(self) -> tuple[int, int, int]:
        """Histogram shape in storage order (y, x, theta)."""
        return (self.n_y, self.n_x, self.n_theta)

    def spatial_centers(self, n_z: int) -> np.ndarray:
        """Centers of n_z cells tiling [-lambda_patch, lambda_patch]."""
        width = 2.0 * self.lambda_patch / n_z
        return -self.lambda_patch + (np.arange(n_z) + 0.5) * width

    def angular_centers(self) -> np.ndarray:
        """Orientation bin centers 2*pi*k/n_theta."""
        return 2.0 * math.pi * np.arange(self.n_theta) / self.n_theta

    @property
    def label(self) -> str:
        return f"{self.n_x}x{self.n_y}x{self.n_theta}"


class Patch(BaseModel):
    """A square normalized patch J sampled around a feature frame."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    intensities: np.ndarray = Field(..., description="side x side gray levels")

    @model_validator(mode="before")
    @classmethod
    def coerce_array(cls, data):
        if isinstance(data, dict) and "intensities" in data:
            data = {**data, "intensities": _frozen_array(data["intensities"])}
        return data

    @model_validator(mode="after")
    def validate_square_and_finite(self) -> "Patch":
        values = self.intensities
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] == 0:
            raise ValueError(f"Patch must be a non-empty square array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("Patch intensities must be finite")
        return self

    @property
    def side(self) -> int:
        return int(self.intensities.shape[0])


class GradientField(BaseModel):
    """Per-pixel gradient magnitude and orientation in [0, 2*pi)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    magnitude: np.ndarray
    orientation: np.ndarray

    @model_validator(mode="after")
    def validate_extent(self) -> "GradientField":
        if self.magnitude.shape != self.orientation.shape:
            raise ValueError("magnitude and orientation must share one extent")
        if np.any(self.magnitude < 0):
            raise ValueError("gradient magnitudes must be nonnegative")
        return self


class RawDescriptor(BaseModel):
    """Unnormalized bin masses d with total mass M and per-bin probability p = 1/L."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bins: np.ndarray = Field(..., description="L nonnegative bin masses")
    mass: float = Field(..., ge=0, description="M, the sum of all bins")
    bin_probability: float = Field(..., gt=0, le=1, description="p = 1/L")

    @model_validator(mode="before")
    @classmethod
    def coerce_bins(cls, data):
        if isinstance(data, dict) and "bins" in data:
            data = {**data, "bins": _frozen_array(data["bins"]).ravel()}
        return data

    @model_validator(mode="after")
    def validate_mass(self) -> "RawDescriptor":
        if self.bins.size == 0:
            raise ValueError("a descriptor needs at least one bin")
        if np.any(self.bins < 0) or not np.all(np.isfinite(self.bins)):
            raise ValueError("bins must be finite and nonnegative")
        total = float(self.bins.sum())
        if abs(total - self.mass) > MASS_RELATIVE_TOLERANCE * max(abs(total), 1e-300):
            raise ValueError(f"mass {self.mass} does not match the bin sum {total}")
        return self

    @classmethod
    def from_bins(cls, bins) -> "RawDescriptor":
        """Build a descriptor from bin masses, deriving M and p = 1/L."""
        array = _frozen_array(bins).ravel()
        return cls(bins=array, mass=float(array.sum()), bin_probability=1.0 / array.size)

    @property
    def bin_count(self) -> int:
        return int(self.bins.size)


class NormalizedDescriptor(BaseModel):
    """Unit-length descriptor, or the all-zero sentinel for structureless patches."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bins: np.ndarray

    @model_validator(mode="before")
    @classmethod
    def coerce_bins(cls, data):
        if isinstance(data, dict) and "bins" in data:
            data = {**data, "bins": _frozen_array(data["bins"]).ravel()}
        return data

    @model_validator(mode="after")
    def validate_unit_norm(self) -> "NormalizedDescriptor":
        if np.any(self.bins < 0):
            raise ValueError("normalized bins must be nonnegative")
        norm = float(np.linalg.norm(self.bins))
        if norm != 0.0 and abs(norm - 1.0) > UNIT_NORM_TOLERANCE:
            raise ValueError(f"descriptor norm must be 1 or 0, got {norm}")
        return self

    @classmethod
    def sentinel(cls, bin_count: int) -> "NormalizedDescriptor":
        """The all-zero descriptor; it never matches anything."""
        return cls(bins=np.zeros(bin_count))

    @property
    def is_sentinel(self) -> bool:
        return not bool(np.any(self.bins))


class ClampVariant(str, Enum):
    """Clamping strategies; values are the names accepted on the command line."""

    NONE = "none"
    LOWE = "lowe"
    MEANINGFUL_EXACT = "mc-exact"
    MEANINGFUL_APPROX = "mc-approx"


class ClampPolicy(BaseModel):
    """A clamping strategy and, for Lowe clamping, its cap c."""

    model_config = ConfigDict(frozen=True)

    variant: ClampVariant = Field(default=ClampVariant.NONE)
    c: float = Field(default=0.2, gt=0, le=1, description="Lowe cap on unit-normalized bins")

    @property
    def name(self) -> str:
        return self.variant.value

    @property
    def is_meaningful(self) -> bool:
        return self.variant in (ClampVariant.MEANINGFUL_EXACT, ClampVariant.MEANINGFUL_APPROX)


class ClampResult(BaseModel):
    """Clamped descriptor together with what the clamp did to it."""

    model_config = ConfigDict(frozen=True)

    descriptor: NormalizedDescriptor
    threshold: float | None = Field(
        default=None, description="Cap applied (raw domain for MC, unit domain for Lowe)"
    )
    clamped_bins: int = Field(default=0, ge=0, description="Bins reduced by the cap")
    removed_fraction: float = Field(
        default=0.0, ge=0, le=1, description="Fraction of mass removed by the cap"
    )
    saturated: bool = Field(default=False, description="Exact threshold search saturated")
