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
"""Geometry, matching and evaluation records.

Status of a precision-recall point:
- recall is always defined (0 when there are no correspondences)
- one_minus_precision is NaN at thresholds where no match exists yet
"""

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

HOMOGRAPHY_DET_TOLERANCE = 1e-12


def _readonly(values, dtype=np.float64) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class FeatureFrame(BaseModel):
    """Similarity frame of a detected feature: center, scale (region radius) and orientation."""

    model_config = ConfigDict(frozen=True)

    x: float = Field(..., description="Column of the frame center in pixels")
    y: float = Field(..., description="Row of the frame center in pixels")
    scale: float = Field(..., gt=0, description="Region radius in pixels")
    orientation: float = Field(default=0.0, description="Orientation in radians")

    @field_validator("x", "y", "scale", "orientation")
    @classmethod
    def ensure_finite(cls, v: float) -> float:
        """Reject NaN and infinite coordinates."""
        if not math.isfinite(v):
            raise ValueError(f"frame values must be finite, got {v}")
        return v


class Homography(BaseModel):
    """3x3 projective map from image A to image B, normalized so H[2, 2] = 1 when nonzero."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: np.ndarray

    @model_validator(mode="before")
    @classmethod
    def normalize_matrix(cls, data):
        if isinstance(data, dict) and "matrix" in data:
            matrix = np.array(data["matrix"], dtype=np.float64, copy=True)
            if matrix.shape == (3, 3) and np.all(np.isfinite(matrix)) and matrix[2, 2] != 0:
                matrix = matrix / matrix[2, 2]
            data = {**data, "matrix": _readonly(matrix)}
        return data

    @model_validator(mode="after")
    def validate_invertible(self) -> "Homography":
        if self.matrix.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got shape {self.matrix.shape}")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("homography entries must be finite")
        scale = float(np.max(np.abs(self.matrix)))
        determinant = float(np.linalg.det(self.matrix / scale)) if scale > 0 else 0.0
        if abs(determinant) <= HOMOGRAPHY_DET_TOLERANCE:
            raise ValueError("homography is singular")
        return self

    @classmethod
    def identity(cls) -> "Homography":
        return cls(matrix=np.eye(3))

    def inverse(self) -> "Homography":
        return Homography(matrix=np.linalg.inv(self.matrix))


class DescriptorSet(BaseModel):
    """Frames of one image and their parallel unit descriptors (one row per frame)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    frames: list[FeatureFrame] = Field(default_factory=list)
    descriptors: np.ndarray = Field(default_factory=lambda: np.zeros((0, 0)))

    @model_validator(mode="before")
    @classmethod
    def coerce_descriptors(cls, data):
        if isinstance(data, dict) and "descriptors" in data:
            array = np.array(data["descriptors"], dtype=np.float64, copy=True)
            if array.size == 0 and array.ndim != 2:
                array = np.zeros((len(data.get("frames", [])), 0))
            array.setflags(write=False)
            data = {**data, "descriptors": array}
        return data

    @model_validator(mode="after")
    def validate_parallel(self) -> "DescriptorSet":
        if self.descriptors.ndim != 2:
            raise ValueError("descriptors must be a 2-D array")
        if self.descriptors.shape[0] != len(self.frames):
            raise ValueError(
                f"{len(self.frames)} frames but {self.descriptors.shape[0]} descriptors"
            )
        return self

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def descriptor_length(self) -> int:
        return int(self.descriptors.shape[1])


class MatchSet(BaseModel):
    """All descriptor pairs closer than a threshold, ordered by (index_a, index_b)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    index_a: np.ndarray
    index_b: np.ndarray
    distance: np.ndarray
    threshold: float = Field(..., gt=0)

    @model_validator(mode="after")
    def validate_below_threshold(self) -> "MatchSet":
        if not (self.index_a.shape == self.index_b.shape == self.distance.shape):
            raise ValueError("index_a, index_b and distance must be parallel")
        if self.distance.size and float(self.distance.max()) >= self.threshold:
            raise ValueError("every match distance must be below the threshold")
        return self

    def __len__(self) -> int:
        return int(self.distance.size)

    @property
    def pairs(self) -> list[tuple[int, int, float]]:
        return [
            (int(a), int(b), float(d))
            for a, b, d in zip(self.index_a, self.index_b, self.distance, strict=True)
        ]


class PRCurve(BaseModel):
    """Precision-recall points over a strictly increasing threshold sweep.

    correct_matches and false_matches are the counts behind each point and are
    kept for audit; correspondences is the recall denominator.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    thresholds: np.ndarray
    recall: np.ndarray
    one_minus_precision: np.ndarray
    correct_matches: np.ndarray
    false_matches: np.ndarray
    correspondences: int = Field(..., ge=0)
    sample_count: int = Field(default=100, ge=1)

    @model_validator(mode="after")
    def validate_points(self) -> "PRCurve":
        arrays = (
            self.thresholds,
            self.recall,
            self.one_minus_precision,
            self.correct_matches,
            self.false_matches,
        )
        if any(array.shape != (self.sample_count,) for array in arrays):
            raise ValueError(f"every curve array must hold exactly {self.sample_count} points")
        if self.sample_count > 1 and not np.all(np.diff(self.thresholds) > 0):
            raise ValueError("thresholds must be strictly increasing")
        return self

    @property
    def precision(self) -> np.ndarray:
        return 1.0 - self.one_minus_precision

    @property
    def has_matches(self) -> bool:
        return bool(np.any(self.correct_matches + self.false_matches > 0))

    @classmethod
    def empty(cls, sample_count: int, correspondences: int = 0) -> "PRCurve":
        """Curve of a pair where no finite distance exists (no threshold can match)."""
        zeros = np.zeros(sample_count)
        return cls(
            thresholds=np.arange(1, sample_count + 1, dtype=np.float64),
            recall=zeros,
            one_minus_precision=np.full(sample_count, np.nan),
            correct_matches=np.zeros(sample_count, dtype=np.int64),
            false_matches=np.zeros(sample_count, dtype=np.int64),
            correspondences=correspondences,
            sample_count=sample_count,
        )


class APResult(BaseModel):
    """Average precision of one curve plus the counts it was computed from."""

    model_config = ConfigDict(frozen=True)

    ap: float = Field(..., ge=0, le=1)
    correct_matches: list[int] = Field(default_factory=list)
    false_matches: list[int] = Field(default_factory=list)
    correspondences: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def zero_when_nothing_matched(self) -> "APResult":
        if len(self.correct_matches) != len(self.false_matches):
            raise ValueError("correct_matches and false_matches must be parallel")
        if not self.correct_matches:
            return self
        no_matches = not any(c + f for c, f in zip(self.correct_matches, self.false_matches))
        if no_matches and self.ap != 0.0:
            raise ValueError("AP must be zero when no threshold produces a match")
        return self


class Sequence(BaseModel):
    """An image sequence: reference image first, homographies from image 1 to image k."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    images: list[np.ndarray]
    homographies: list[Homography]

    @model_validator(mode="after")
    def validate_counts(self) -> "Sequence":
        if len(self.images) < 1:
            raise ValueError("a sequence needs at least one image")
        if len(self.homographies) != len(self.images) - 1:
            raise ValueError(
                f"sequence '{self.name}' has {len(self.images)} images but "
                f"{len(self.homographies)} homographies"
            )
        return self
