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
"""Dataset records: parsed frame files and the image pairs fed to the benchmark."""

from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from siftclamp.models.evaluation import DescriptorSet, FeatureFrame, Homography


class FrameFile(BaseModel):
    """Rows of a frame file: (x, y, scale, orientation) plus optional descriptor columns."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    frames: list[FeatureFrame] = Field(default_factory=list)
    descriptors: np.ndarray | None = Field(
        default=None, description="One unit descriptor per frame, when the file carries them"
    )

    @model_validator(mode="after")
    def validate_parallel(self) -> "FrameFile":
        if self.descriptors is not None and self.descriptors.shape[0] != len(self.frames):
            raise ValueError(
                f"{len(self.frames)} frames but {self.descriptors.shape[0]} descriptor rows"
            )
        return self

    @property
    def has_descriptors(self) -> bool:
        return self.descriptors is not None

    def to_descriptor_set(self) -> DescriptorSet:
        if self.descriptors is None:
            raise ValueError("frame file carries no descriptors")
        return DescriptorSet(frames=self.frames, descriptors=self.descriptors)


class PairSpec(BaseModel):
    """File locations of one reference/target pair (image 1 -> image k) of a sequence."""

    model_config = ConfigDict(frozen=True)

    sequence: str
    pair_index: int = Field(..., ge=2)
    image_a: Path
    image_b: Path
    frames_a: Path
    frames_b: Path
    homography: Path

    @property
    def label(self) -> str:
        return f"{self.sequence}/1-{self.pair_index}"


class PairInput(BaseModel):
    """A loaded pair: both rasters, both frame lists and the ground-truth homography."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    sequence: str
    pair_index: int = Field(..., ge=2)
    image_a: np.ndarray
    image_b: np.ndarray
    frames_a: list[FeatureFrame]
    frames_b: list[FeatureFrame]
    homography: Homography

    @property
    def label(self) -> str:
        return f"{self.sequence}/1-{self.pair_index}"
