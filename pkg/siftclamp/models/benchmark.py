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
"""Pipeline options and per-pair evaluation output of the benchmark service."""

from pydantic import BaseModel, ConfigDict, Field, field_validator

from siftclamp.models.acontrario import AContrarioConfig
from siftclamp.models.descriptor import ClampPolicy, HistogramGrid
from siftclamp.models.evaluation import PRCurve
from siftclamp.models.report import PairResult


class PipelineConfig(BaseModel):
    """Everything that turns (image, frames) into descriptors and descriptors into APs."""

    model_config = ConfigDict(frozen=True)

    grid: HistogramGrid = Field(default_factory=HistogramGrid)
    acontrario: AContrarioConfig = Field(default_factory=AContrarioConfig)
    policies: list[ClampPolicy] = Field(..., min_length=1)
    magnification: float = Field(default=3.0, gt=0)
    sample_count: int = Field(default=100, ge=2, description="Thresholds in the PR sweep")

    @field_validator("policies")
    @classmethod
    def unique_policies(cls, v: list[ClampPolicy]) -> list[ClampPolicy]:
        names = [policy.name for policy in v]
        if len(set(names)) != len(names):
            raise ValueError(f"policies must be distinct, got {', '.join(names)}")
        return v

    @property
    def policy_names(self) -> list[str]:
        return [policy.name for policy in self.policies]


class PairEvaluation(BaseModel):
    """Rows and PR curves of one pair, one entry per policy."""

    model_config = ConfigDict(frozen=True)

    sequence: str
    pair_index: int
    rows: list[PairResult]
    curves: dict[str, PRCurve]

    @property
    def label(self) -> str:
        return f"{self.sequence}/1-{self.pair_index}"
