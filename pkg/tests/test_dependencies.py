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
"""Tests for the settings-to-domain factories shared by the CLI and the API."""

import os
from unittest.mock import patch

import pytest

from siftclamp.config import Settings
from siftclamp.dependencies import (
    POLICY_NAMES,
    build_acontrario_config,
    build_grid,
    build_pipeline,
    get_cached_settings,
    parse_policies,
    parse_policy,
)
from siftclamp.models.descriptor import ClampVariant


@pytest.fixture
def settings() -> Settings:
    with patch.dict(os.environ, {}, clear=True):
        return Settings()


def test_get_cached_settings_returns_singleton():
    """Test that the dependency returns the cached settings instance."""
    assert get_cached_settings() is get_cached_settings()


def test_build_grid_from_settings(settings):
    """Test that the default grid is 4x4x8 with sigma equal to the patch radius."""
    grid = build_grid(settings)
    assert (grid.n_x, grid.n_y, grid.n_theta) == (4, 4, 8)
    assert grid.lambda_patch == 12.0
    assert grid.sigma == 12.0


def test_build_grid_override_keeps_patch_settings():
    """Test that a grid override changes the lattice but not the patch geometry."""
    with patch.dict(os.environ, {"PATCH_RADIUS": "16", "GAUSSIAN_SIGMA": "8"}, clear=True):
        settings = Settings()
    grid = build_grid(settings, "2x3x6")
    assert (grid.n_x, grid.n_y, grid.n_theta) == (2, 3, 6)
    assert grid.lambda_patch == 16.0
    assert grid.sigma == 8.0


def test_build_grid_rejects_malformed_override(settings):
    """Test that a malformed override raises ValueError."""
    with pytest.raises(ValueError, match="Invalid grid"):
        build_grid(settings, "4-4-8")


def test_build_acontrario_config(settings):
    """Test that epsilon comes from EPSILON unless overridden."""
    assert build_acontrario_config(settings).epsilon == 1.0
    assert build_acontrario_config(settings, 0.01).epsilon == 0.01


@pytest.mark.parametrize("name", ["lowe", " LOWE ", "Lowe"])
def test_parse_policy_is_case_insensitive(name):
    """Test that policy names are trimmed and case-folded."""
    policy = parse_policy(name, 0.3)
    assert policy.variant == ClampVariant.LOWE
    assert policy.c == 0.3


def test_parse_policy_knows_every_variant():
    """Test that every documented name parses to its variant."""
    assert POLICY_NAMES == ("none", "lowe", "mc-exact", "mc-approx")
    assert [parse_policy(name).name for name in POLICY_NAMES] == list(POLICY_NAMES)


def test_parse_policy_rejects_unknown_names():
    """Test that the error lists the accepted names."""
    with pytest.raises(ValueError, match="mc-approx"):
        parse_policy("sift")


def test_parse_policies_preserves_order():
    """Test that comma-separated lists keep their order and skip blanks."""
    policies = parse_policies("mc-approx, none,,lowe")
    assert [policy.name for policy in policies] == ["mc-approx", "none", "lowe"]


def test_parse_policies_requires_one():
    """Test that an empty list is rejected."""
    with pytest.raises(ValueError, match="at least one"):
        parse_policies(" , ")


def test_build_pipeline_defaults(settings):
    """Test that the pipeline takes magnification and sweep size from settings."""
    pipeline = build_pipeline(settings, parse_policies("none,lowe"))
    assert pipeline.policy_names == ["none", "lowe"]
    assert pipeline.magnification == 3.0
    assert pipeline.sample_count == 100
    assert pipeline.grid.bin_count == 128


def test_build_pipeline_overrides(settings):
    """Test that explicit values win over settings."""
    pipeline = build_pipeline(
        settings,
        parse_policies("mc-exact"),
        grid="2x2x4",
        epsilon=0.1,
        magnification=2.0,
        sample_count=20,
    )
    assert pipeline.grid.bin_count == 16
    assert pipeline.acontrario.epsilon == 0.1
    assert pipeline.magnification == 2.0
    assert pipeline.sample_count == 20


def test_build_pipeline_rejects_duplicates(settings):
    """Test that listing a policy twice is rejected."""
    with pytest.raises(ValueError):
        build_pipeline(settings, parse_policies("lowe,lowe"))
