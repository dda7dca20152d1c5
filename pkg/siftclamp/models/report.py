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
"""Benchmark report records.

These are the rows written to CSV/JSON by the report writers and returned by
the evaluation commands. Floats are rounded by the writers, not here.
"""

from pydantic import BaseModel, Field, computed_field

ALL_IMAGES = "All images"


def relative_improvement(baseline: float, improved: float) -> float | None:
    """100 * (improved - baseline) / baseline, or None when the baseline is not positive."""
    if baseline <= 0:
        return None
    return 100.0 * (improved - baseline) / baseline


class PairResult(BaseModel):
    """AP of one image pair under one clamping policy."""

    sequence: str = Field(..., description="Sequence (category) name")
    pair_index: int = Field(..., ge=2, description="Target image index k of the pair 1 -> k")
    policy: str = Field(..., description="Clamping policy name")
    ap: float = Field(..., ge=0, le=1)
    correspondences: int = Field(default=0, ge=0)
    correct_matches: int = Field(
        default=0, ge=0, description="Correct matches at the last threshold"
    )
    false_matches: int = Field(default=0, ge=0, description="False matches at the last threshold")
    features_a: int = Field(default=0, ge=0)
    features_b: int = Field(default=0, ge=0)
    clamped_fraction: float = Field(
        default=0.0, ge=0, le=1, description="Mean fraction of descriptor mass removed by clamping"
    )

    @property
    def sort_key(self) -> tuple[str, int, str]:
        return (self.sequence, self.pair_index, self.policy)


class CategorySummary(BaseModel):
    """mAP per policy for one category (or for all images)."""

    category: str
    pair_count: int = Field(..., ge=0)
    map_by_policy: dict[str, float] = Field(default_factory=dict)


class BenchReport(BaseModel):
    """Per-pair rows, per-category and overall mAP, and the MC-over-Lowe improvement."""

    policies: list[str]
    pairs: list[PairResult] = Field(default_factory=list)
    categories: list[CategorySummary] = Field(default_factory=list)
    overall: CategorySummary | None = None
    skipped: list[str] = Field(
        default_factory=list, description="Pairs that could not be evaluated"
    )

    @computed_field  # type: ignore[prop-decorator]
    @property
    def improvement_percent(self) -> dict[str, float | None]:
        """Relative mAP improvement of each meaningful-clamping policy over Lowe clamping."""
        if self.overall is None or "lowe" not in self.overall.map_by_policy:
            return {}
        lowe = self.overall.map_by_policy["lowe"]
        return {
            policy: relative_improvement(lowe, value)
            for policy, value in self.overall.map_by_policy.items()
            if policy.startswith("mc-")
        }
