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
"""Tests for gradient histograms and the clamping policies."""

import math

import numpy as np
import pytest

from siftclamp.exceptions import DescriptorError
from siftclamp.models.descriptor import (
    ClampPolicy,
    ClampVariant,
    HistogramGrid,
    NormalizedDescriptor,
    Patch,
    RawDescriptor,
)
from siftclamp.services import acontrario, descriptor

NONE = ClampPolicy(variant=ClampVariant.NONE)
LOWE = ClampPolicy(variant=ClampVariant.LOWE, c=0.2)
MC_EXACT = ClampPolicy(variant=ClampVariant.MEANINGFUL_EXACT)
MC_APPROX = ClampPolicy(variant=ClampVariant.MEANINGFUL_APPROX)
ALL_POLICIES = [NONE, LOWE, MC_EXACT, MC_APPROX]


def random_raw(rng: np.random.Generator, bins: int = 128, mass: float = 1000.0) -> RawDescriptor:
    values = rng.exponential(1.0, bins) ** 3
    return RawDescriptor.from_bins(values * (mass / values.sum()))


@pytest.mark.parametrize(
    "z,n_z,lam,expected",
    [(0.0, 4, 6.0, 1.0), (0.0, 1, 100.0, 1.0), (1.5, 4, 6.0, 0.5), (3.0, 4, 6.0, 0.0)],
)
def test_spatial_weight(z, n_z, lam, expected):
    """Test the bilinear tent at its center, half-way point and support edge."""
    assert descriptor.spatial_weight(z, n_z, lam) == pytest.approx(expected)


@pytest.mark.parametrize(
    "theta,theta_k,expected",
    [
        (0.3, 0.3, 1.0),
        (math.pi / 8, 0.0, 0.5),
        (math.pi / 4, 0.0, 0.0),
        (2 * math.pi - math.pi / 8, 0.0, 0.5),
        (0.0, 2 * math.pi - math.pi / 8, 0.5),
    ],
)
def test_angular_weight(theta, theta_k, expected):
    """Test the circular tent, including wrap-around at 2 pi."""
    assert descriptor.angular_weight(theta, theta_k, 8) == pytest.approx(expected)


def test_angular_weights_sum_to_one(grid):
    """Test that the orientation tents form a partition of unity."""
    thetas = np.linspace(0.0, 2 * math.pi, 97, endpoint=False)
    weights = descriptor.angular_weight(thetas[:, None], grid.angular_centers(), grid.n_theta)
    np.testing.assert_allclose(weights.sum(axis=1), 1.0, atol=1e-12)


def test_gradient_of_constant_patch():
    """Test that a constant patch has zero gradient everywhere."""
    field = descriptor.gradient_field(Patch(intensities=np.full((24, 24), 80.0)))
    assert not field.magnitude.any()


def test_gradient_of_x_ramp():
    """Test that J(x, y) = x has unit magnitude and orientation 0."""
    ramp = np.tile(np.arange(24, dtype=np.float64), (24, 1))
    field = descriptor.gradient_field(Patch(intensities=ramp))
    np.testing.assert_allclose(field.magnitude, 1.0)
    np.testing.assert_allclose(field.orientation, 0.0)


def test_gradient_of_y_ramp():
    """Test that J(x, y) = y has unit magnitude and orientation pi / 2."""
    ramp = np.tile(np.arange(24, dtype=np.float64)[:, None], (1, 24))
    field = descriptor.gradient_field(Patch(intensities=ramp))
    np.testing.assert_allclose(field.magnitude, 1.0)
    np.testing.assert_allclose(field.orientation, math.pi / 2)


def test_gradient_rejects_tiny_patch():
    """Test that a patch smaller than 3 pixels is rejected."""
    with pytest.raises(DescriptorError):
        descriptor.gradient_field(Patch(intensities=np.zeros((2, 2))))


def test_gaussian_window_peak(grid):
    """Test that the Gaussian window is unnormalized and symmetric."""
    window = descriptor.gaussian_window(grid.patch_side, grid.sigma)
    assert window.max() <= 1.0
    np.testing.assert_allclose(window, window[::-1, :])
    np.testing.assert_allclose(window, window.T)


def test_constant_patch_has_zero_mass(grid):
    """Test that a structureless patch builds a zero descriptor."""
    raw = descriptor.build_descriptor(Patch(intensities=np.full((24, 24), 10.0)), grid)
    assert raw.mass == 0
    assert raw.bin_count == 128


def test_x_ramp_histogram(grid):
    """Test that an x ramp puts all its mass in the first orientation bin, symmetric in y."""
    ramp = np.tile(np.arange(24, dtype=np.float64), (24, 1))
    raw = descriptor.build_descriptor(Patch(intensities=ramp), grid)
    histogram = raw.bins.reshape(grid.shape)
    assert raw.mass > 0
    assert histogram[:, :, 1:].sum() == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(histogram, histogram[::-1, :, :], rtol=1e-12, atol=1e-9)


def test_build_descriptor_conserves_mass(grid, rng):
    """Test that the descriptor mass equals the per-pixel weighted sum."""
    patch = Patch(intensities=rng.uniform(0.0, 255.0, (24, 24)))
    raw = descriptor.build_descriptor(patch, grid)
    field = descriptor.gradient_field(patch)

    centers = [-9.0, -3.0, 3.0, 9.0]
    expected = 0.0
    for row in range(24):
        for col in range(24):
            u, v = col - 11.5, row - 11.5
            weight_x = sum(max(0.0, 1.0 - abs(u - c) / 6.0) for c in centers)
            weight_y = sum(max(0.0, 1.0 - abs(v - c) / 6.0) for c in centers)
            gauss = math.exp(-(u * u + v * v) / (2.0 * 12.0 * 12.0))
            # orientation tents of 8 bins sum to one
            expected += gauss * field.magnitude[row, col] * weight_x * weight_y
    assert raw.mass == pytest.approx(expected, rel=1e-9)


def test_build_descriptor_rejects_wrong_side(grid):
    """Test that a patch of the wrong size is a dimension mismatch."""
    with pytest.raises(DescriptorError):
        descriptor.build_descriptor(Patch(intensities=np.zeros((20, 20))), grid)


def test_normalize_examples():
    """Test unit normalization and the zero sentinel."""
    unit = descriptor.normalize(RawDescriptor.from_bins([3.0, 4.0]))
    np.testing.assert_allclose(unit.bins, [0.6, 0.8])
    assert descriptor.normalize(RawDescriptor.from_bins([0.0, 0.0])).is_sentinel


def test_normalize_has_unit_norm(rng):
    """Test that any nonzero descriptor normalizes to unit length."""
    for _ in range(20):
        unit = descriptor.normalize(random_raw(rng))
        assert np.linalg.norm(unit.bins) == pytest.approx(1.0, abs=1e-9)


def test_spike_without_clamping(grid, cfg):
    """Test that a single-bin descriptor normalizes to an axis unit vector."""
    bins = np.zeros(grid.bin_count)
    bins[3] = 1.0
    result = descriptor.clamp(RawDescriptor.from_bins(bins), NONE, cfg, grid)
    expected = np.zeros(grid.bin_count)
    expected[3] = 1.0
    np.testing.assert_allclose(result.bins, expected)


def test_lowe_two_bin_example(cfg):
    """Test that (0.8, 0.6) clamped at 0.5 renormalizes to equal components."""
    grid = HistogramGrid(n_x=1, n_y=1, n_theta=2)
    policy = ClampPolicy(variant=ClampVariant.LOWE, c=0.5)
    result = descriptor.clamp_with_details(RawDescriptor.from_bins([0.8, 0.6]), policy, cfg, grid)
    np.testing.assert_allclose(result.descriptor.bins, [0.70711, 0.70711], atol=1e-5)
    assert result.threshold == 0.5
    assert result.clamped_bins == 2


def test_meaningful_approx_spike(grid, cfg):
    """Test that a 1000-mass spike is capped at the closed-form threshold."""
    bins = np.zeros(grid.bin_count)
    bins[0] = 1000.0
    result = descriptor.clamp_with_details(RawDescriptor.from_bins(bins), MC_APPROX, cfg, grid)
    assert result.threshold == pytest.approx(15.7799, abs=1e-3)
    assert result.clamped_bins == 1
    assert result.removed_fraction == pytest.approx(1.0 - result.threshold / 1000.0)
    assert result.descriptor.bins[0] == pytest.approx(1.0)
    assert result.descriptor.bins[1:].sum() == 0.0


@pytest.mark.parametrize("policy", ALL_POLICIES, ids=lambda p: p.name)
def test_zero_mass_gives_sentinel(policy, grid, cfg):
    """Test that every policy maps a zero descriptor to the sentinel."""
    raw = RawDescriptor.from_bins(np.zeros(grid.bin_count))
    result = descriptor.clamp(raw, policy, cfg, grid)
    assert isinstance(result, NormalizedDescriptor)
    assert result.is_sentinel


def test_clamp_rejects_length_mismatch(grid, cfg):
    """Test that a descriptor of the wrong length is rejected."""
    with pytest.raises(DescriptorError):
        descriptor.clamp(RawDescriptor.from_bins(np.ones(64)), LOWE, cfg, grid)


@pytest.mark.parametrize("policy", ALL_POLICIES, ids=lambda p: p.name)
def test_clamped_descriptors_are_unit(policy, grid, cfg, rng):
    """Test that every policy returns unit, nonnegative descriptors."""
    for _ in range(10):
        result = descriptor.clamp(random_raw(rng), policy, cfg, grid)
        assert np.linalg.norm(result.bins) == pytest.approx(1.0, abs=1e-9)
        assert result.bins.min() >= 0.0


def test_lowe_cap_respected(grid, cfg, rng):
    """Test that Lowe clamping caps the unit descriptor at c before renormalizing."""
    raw = random_raw(rng)
    result = descriptor.clamp_with_details(raw, LOWE, cfg, grid)
    unit = raw.bins / np.linalg.norm(raw.bins)
    capped = np.minimum(unit, 0.2)
    assert capped.max() <= 0.2
    np.testing.assert_allclose(result.descriptor.bins, capped / np.linalg.norm(capped))
    assert result.clamped_bins == int(np.count_nonzero(unit > 0.2))


@pytest.mark.parametrize("policy", [MC_EXACT, MC_APPROX], ids=lambda p: p.name)
def test_meaningful_cap_respected(policy, grid, cfg):
    """Test that meaningful clamping caps raw bins at the threshold, then normalizes."""
    rng = np.random.default_rng(2024)
    peaked = np.ones(grid.bin_count)
    peaked[17] = 900.0
    samples = [random_raw(rng, mass=float(rng.uniform(50.0, 5000.0))) for _ in range(100)]
    samples.append(RawDescriptor.from_bins(peaked))
    for raw in samples:
        result = descriptor.clamp_with_details(raw, policy, cfg, grid)
        threshold, _ = descriptor.meaningful_threshold(raw, policy, cfg, grid)
        assert result.threshold == threshold
        capped = np.minimum(raw.bins, threshold)
        scale = np.linalg.norm(capped)
        # back in the raw domain no bin of the output exceeds the cap
        assert np.all(result.descriptor.bins * scale <= threshold * (1.0 + 1e-12))
        np.testing.assert_allclose(result.descriptor.bins, capped / scale)
        assert np.linalg.norm(result.descriptor.bins) == pytest.approx(1.0)
        assert result.clamped_bins == int(np.count_nonzero(raw.bins > threshold))
        assert 0.0 <= result.removed_fraction <= 1.0

    peak = descriptor.clamp_with_details(samples[-1], policy, cfg, grid)
    assert peak.clamped_bins >= 1
    assert peak.removed_fraction > 0.5


def test_meaningful_exact_threshold_matches_statistics(grid, cfg, rng):
    """Test that the exact policy uses the exact threshold of (M, 1/L, N_rect)."""
    raw = random_raw(rng, mass=700.0)
    threshold, saturated = descriptor.meaningful_threshold(raw, MC_EXACT, cfg, grid)
    assert threshold == acontrario.exact_threshold(cfg, 3600, raw.mass, 1 / 128)
    assert not saturated


def test_meaningful_threshold_rejects_other_policies(grid, cfg, rng):
    """Test that Lowe clamping has no a contrario threshold."""
    with pytest.raises(DescriptorError):
        descriptor.meaningful_threshold(random_raw(rng), LOWE, cfg, grid)


@pytest.mark.parametrize("scale", [1e-3, 1.0, 1e3])
def test_lowe_affine_contrast_invariance(scale, grid, cfg, rng):
    """Test that scaling the raw bins does not change the Lowe-clamped descriptor."""
    for _ in range(100):
        raw = random_raw(rng)
        scaled = RawDescriptor.from_bins(raw.bins * scale)
        np.testing.assert_allclose(
            descriptor.clamp(scaled, LOWE, cfg, grid).bins,
            descriptor.clamp(raw, LOWE, cfg, grid).bins,
            atol=1e-9,
        )


def test_approx_threshold_at_most_exact_per_descriptor(grid, cfg, rng):
    """Test that the approximate policy never caps above the exact policy."""
    for _ in range(25):
        raw = random_raw(rng, mass=float(rng.uniform(100.0, 5000.0)))
        approx, _ = descriptor.meaningful_threshold(raw, MC_APPROX, cfg, grid)
        exact, _ = descriptor.meaningful_threshold(raw, MC_EXACT, cfg, grid)
        assert approx <= exact


@pytest.mark.parametrize("policy", ALL_POLICIES, ids=lambda p: p.name)
def test_clamp_is_permutation_equivariant(policy, grid, cfg, rng):
    """Test that permuting the raw bins permutes the clamped output identically."""
    raw = random_raw(rng)
    order = rng.permutation(grid.bin_count)
    permuted = RawDescriptor.from_bins(raw.bins[order])
    np.testing.assert_allclose(
        descriptor.clamp(permuted, policy, cfg, grid).bins,
        descriptor.clamp(raw, policy, cfg, grid).bins[order],
        atol=1e-12,
    )


def test_descriptor_of_real_patch(grid, cfg, texture):
    """Test that Lowe clamping changes a textured descriptor only when a bin exceeds c."""
    patch = Patch(intensities=texture[40:64, 40:64])
    raw = descriptor.build_descriptor(patch, grid)
    plain = descriptor.clamp(raw, NONE, cfg, grid)
    lowe = descriptor.clamp(raw, LOWE, cfg, grid)
    assert raw.mass > 0
    if plain.bins.max() <= 0.2:
        np.testing.assert_allclose(lowe.bins, plain.bins)
    else:
        assert not np.allclose(lowe.bins, plain.bins)
