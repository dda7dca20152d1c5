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
"""Configuration and query types for the a contrario statistics core.

AContrarioConfig carries the detection budget (epsilon) and how the number of
tests is chosen. TailQuery names the three arguments of a binomial tail so API
handlers and diagnostics can pass them around as one value; its domain is
checked by the statistics functions themselves so that violations surface as
DomainError rather than as validation errors.
"""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from siftclamp.exceptions import DomainError


class TestCountMode(str, Enum):
    """How the number of tests of the NFA is chosen."""

    __test__ = False  # not a pytest test class

    RECTANGULAR = "rectangular"
    EXPLICIT = "explicit"


class AContrarioConfig(BaseModel):
    """Detection budget and test-count selection for meaningful clamping."""

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(
        default=1.0, gt=0, description="A bin is meaningful when its NFA is below epsilon"
    )
    test_count_mode: TestCountMode = Field(
        default=TestCountMode.RECTANGULAR,
        description="rectangular: count aligned rectangular regions of the grid; "
        "explicit: use explicit_tests",
    )
    explicit_tests: float | None = Field(
        default=None, ge=1, description="Number of tests when test_count_mode is explicit"
    )

    @model_validator(mode="after")
    def validate_explicit_tests(self) -> "AContrarioConfig":
        """Explicit mode needs a test count; rectangular mode must not carry one."""
        if self.test_count_mode == TestCountMode.EXPLICIT and self.explicit_tests is None:
            raise ValueError("explicit_tests is required when test_count_mode is 'explicit'")
        if self.test_count_mode == TestCountMode.RECTANGULAR and self.explicit_tests is not None:
            raise ValueError("explicit_tests is only meaningful when test_count_mode is 'explicit'")
        return self


class TailQuery(BaseModel):
    """Arguments of the binomial tail P[X >= k] for X ~ Binomial(mass, p)."""

    model_config = ConfigDict(frozen=True)

    mass: float = Field(..., description="Total sample mass M (may be non-integer)")
    k: float = Field(..., description="Bin mass queried (may be non-integer)")
    p: float = Field(..., description="Per-bin probability, 1/L for descriptor bins")

    def check_domain(self) -> None:
        """Raise DomainError unless 0 <= k <= mass and 0 < p < 1."""
        if not (0.0 < self.p < 1.0):
            raise DomainError(f"p must lie in (0, 1), got {self.p}")
        if self.mass < 0 or self.k < 0:
            raise DomainError(f"mass and k must be nonnegative, got mass={self.mass}, k={self.k}")
        if self.k > self.mass:
            raise DomainError(f"k={self.k} exceeds mass={self.mass}")


class ThresholdResult(BaseModel):
    """Exact meaningful-clamping threshold plus whether the search saturated."""

    model_config = ConfigDict(frozen=True)

    value: int = Field(..., ge=0, description="Smallest meaningful bin mass (integer)")
    saturated: bool = Field(
        default=False,
        description="True when no k <= mass is meaningful; value is then ceil(mass)",
    )


class ThresholdSummary(BaseModel):
    """Exact and closed-form thresholds of one (M, L, grid, epsilon) setting."""

    model_config = ConfigDict(frozen=True)

    mass: float = Field(..., ge=0)
    bins: int = Field(..., ge=2, description="L, number of histogram bins")
    p: float
    grid: str
    tests: float = Field(..., ge=1)
    epsilon: float = Field(..., gt=0)
    alpha: float
    exact: int
    saturated: bool
    approx: float
    slud_exact: bool = Field(..., description="Large-deviation conditions at r = exact / M")
    slud_approx: bool = Field(..., description="Large-deviation conditions at r = approx / M")

    @computed_field  # type: ignore[prop-decorator]
    @property
    def exact_at_least_approx(self) -> bool:
        return self.exact >= self.approx
