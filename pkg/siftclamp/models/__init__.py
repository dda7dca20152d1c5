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
"""Domain models for descriptors, clamping statistics, evaluation and reports."""

from siftclamp.models.acontrario import (
    AContrarioConfig,
    TailQuery,
    TestCountMode,
    ThresholdResult,
    ThresholdSummary,
)
from siftclamp.models.benchmark import PairEvaluation, PipelineConfig
from siftclamp.models.dataset import FrameFile, PairInput, PairSpec
from siftclamp.models.descriptor import (
    ClampPolicy,
    ClampResult,
    ClampVariant,
    GradientField,
    HistogramGrid,
    NormalizedDescriptor,
    Patch,
    RawDescriptor,
)
from siftclamp.models.evaluation import (
    APResult,
    DescriptorSet,
    FeatureFrame,
    Homography,
    MatchSet,
    PRCurve,
    Sequence,
)
from siftclamp.models.report import BenchReport, CategorySummary, PairResult

__all__ = [
    "AContrarioConfig",
    "TailQuery",
    "TestCountMode",
    "ThresholdResult",
    "ThresholdSummary",
    "ClampPolicy",
    "ClampResult",
    "ClampVariant",
    "GradientField",
    "HistogramGrid",
    "NormalizedDescriptor",
    "Patch",
    "RawDescriptor",
    "APResult",
    "DescriptorSet",
    "FeatureFrame",
    "Homography",
    "MatchSet",
    "PRCurve",
    "Sequence",
    "PairEvaluation",
    "PipelineConfig",
    "FrameFile",
    "PairInput",
    "PairSpec",
    "BenchReport",
    "CategorySummary",
    "PairResult",
]
