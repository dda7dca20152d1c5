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
"""Pytest configuration and fixtures for all tests."""

import math
import os
from pathlib import Path

import numpy as np
import pytest

from siftclamp.config import get_settings
from siftclamp.models.acontrario import AContrarioConfig
from siftclamp.models.descriptor import HistogramGrid
from siftclamp.models.evaluation import FeatureFrame
from siftclamp.services import imageio

# Tests must not pick up a developer's .env or exported overrides
for _name in ("GRID", "PATCH_RADIUS", "GAUSSIAN_SIGMA", "CLAMP_C", "EPSILON", "MAGNIFICATION"):
    os.environ.pop(_name, None)


@pytest.fixture(autouse=True)
def fresh_settings():
    """Clear the settings cache around every test."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def grid() -> HistogramGrid:
    """Default 4x4x8 grid with a 24-pixel patch."""
    return HistogramGrid()


@pytest.fixture
def cfg() -> AContrarioConfig:
    return AContrarioConfig()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def smooth_texture(shape: tuple[int, int], seed: int) -> np.ndarray:
    """Deterministic smoothed-noise texture in [0, 255]."""
    from scipy.ndimage import gaussian_filter

    noise = np.random.default_rng(seed).uniform(0.0, 1.0, shape)
    smoothed = gaussian_filter(noise, sigma=2.0)
    return 255.0 * (smoothed - smoothed.min()) / (smoothed.max() - smoothed.min())


@pytest.fixture
def texture() -> np.ndarray:
    return smooth_texture((128, 128), seed=7)


def lattice_frames(shape: tuple[int, int], spacing: int = 16, scale: float = 4.0):
    """Well separated frames whose measurement disc (radius 3 * scale) fits in the image."""
    height, width = shape
    margin = int(math.ceil(3 * scale)) + 2
    return [
        FeatureFrame(x=float(x), y=float(y), scale=scale, orientation=0.3 * (i % 7))
        for i, (y, x) in enumerate(
            (y, x)
            for y in range(margin, height - margin, spacing)
            for x in range(margin, width - margin, spacing)
        )
    ]


def write_frame_file(path: Path, frames) -> Path:
    path.write_text(
        "".join(f"{f.x!r} {f.y!r} {f.scale!r} {f.orientation!r}\n" for f in frames)
    )
    return path


@pytest.fixture
def self_pair_sequence(tmp_path, texture) -> Path:
    """Oxford-layout sequence whose image 2 is image 1 under the identity homography."""
    directory = tmp_path / "dataset" / "selfie"
    directory.mkdir(parents=True)
    frames = lattice_frames(texture.shape)
    imageio.write_pgm(directory / "img1.pgm", texture)
    imageio.write_pgm(directory / "img2.pgm", texture)
    write_frame_file(directory / "img1.frames", frames)
    write_frame_file(directory / "img2.frames", frames)
    (directory / "H1to2p").write_text("1 0 0\n0 1 0\n0 0 1\n")
    return directory
