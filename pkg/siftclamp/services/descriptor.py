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
"""Gradient-orientation histograms and their clamping policies.

build_descriptor discretizes the weighted histogram integral by summing over
the pixels of the normalized patch: each pixel adds
g_sigma(x) * w_alpha(angle) * w_ij(x) * |grad J| to every bin whose tent
weights are nonzero (at most 2 x 2 x 2 bins). clamp then applies one of the
four policies and returns a unit descriptor.
"""

import logging
import math

import numpy as np

from siftclamp.exceptions import DescriptorError
from siftclamp.models.acontrario import AContrarioConfig
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
from siftclamp.services import acontrario

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def spatial_weight(z, n_z: int, lambda_patch: float):
    """Bilinear tent max(0, 1 - n_z / (2 lambda_patch) |z|); accepts scalars or arrays."""
    weight = np.maximum(0.0, 1.0 - (n_z / (2.0 * lambda_patch)) * np.abs(z))
    return float(weight) if np.ndim(weight) == 0 else weight


def angular_weight(theta, theta_k, n_theta: int):
    """Circular tent max(0, 1 - n_theta / (2 pi) d); d is the angular distance in [0, pi]."""
    difference = np.mod(np.asarray(theta_k, dtype=np.float64) - theta, TWO_PI)
    distance = np.minimum(difference, TWO_PI - difference)
    weight = np.maximum(0.0, 1.0 - (n_theta / TWO_PI) * distance)
    return float(weight) if np.ndim(weight) == 0 else weight


def gradient_field(patch: Patch) -> GradientField:
    """Central differences inside the patch, one-sided differences on its border.

    Rows are y and columns are x; orientation is atan2(dy, dx) folded to [0, 2 pi).
    """
    if patch.side < 3:
        raise DescriptorError(f"patch side must be at least 3 pixels, got {patch.side}")
    d_y, d_x = np.gradient(patch.intensities.astype(np.float64))
    magnitude = np.hypot(d_x, d_y)
    orientation = np.mod(np.arctan2(d_y, d_x), TWO_PI)
    orientation[orientation >= TWO_PI] = 0.0
    orientation[magnitude == 0] = 0.0
    return GradientField(magnitude=magnitude, orientation=orientation)


def pixel_coordinates(side: int) -> np.ndarray:
    """Pixel-center offsets of a patch row, symmetric about the patch center."""
    return np.arange(side, dtype=np.float64) - (side - 1) / 2.0


def gaussian_window(side: int, sigma: float) -> np.ndarray:
    """Unnormalized Gaussian weights exp(-|x|^2 / (2 sigma^2)) over the patch (peak 1)."""
    offsets = pixel_coordinates(side)
    squared = offsets[:, None] ** 2 + offsets[None, :] ** 2
    return np.exp(-squared / (2.0 * sigma * sigma))


def build_descriptor(patch: Patch, grid: HistogramGrid) -> RawDescriptor:
    """Weighted 3-D histogram of gradient orientations, bins flattened in (y, x, theta) order.

    Raises:
        DescriptorError: If the patch side does not match 2 * lambda_patch
    """
    side = patch.side
    if side != grid.patch_side:
        raise DescriptorError(
            f"patch side {side} does not match grid patch side {grid.patch_side} "
            f"(2 * lambda_patch = {2 * grid.lambda_patch})"
        )
    field = gradient_field(patch)
    offsets = pixel_coordinates(side)

    weights_x = spatial_weight(
        offsets[:, None] - grid.spatial_centers(grid.n_x)[None, :], grid.n_x, grid.lambda_patch
    )
    weights_y = spatial_weight(
        offsets[:, None] - grid.spatial_centers(grid.n_y)[None, :], grid.n_y, grid.lambda_patch
    )
    weights_theta = angular_weight(
        field.orientation[..., None], grid.angular_centers(), grid.n_theta
    )
    sample_mass = gaussian_window(side, grid.sigma) * field.magnitude

    histogram = np.einsum(
        "rc,rj,ci,rck->jik",
        sample_mass,
        np.atleast_2d(weights_y),
        np.atleast_2d(weights_x),
        np.asarray(weights_theta).reshape(side, side, grid.n_theta),
    )
    return RawDescriptor.from_bins(histogram.reshape(-1))


def normalize(raw: RawDescriptor) -> NormalizedDescriptor:
    """Scale bins to unit Euclidean norm; a zero-mass descriptor yields the all-zero sentinel."""
    return _unit(raw.bins)


def _unit(bins: np.ndarray) -> NormalizedDescriptor:
    norm = float(np.linalg.norm(bins))
    if norm == 0.0:
        return NormalizedDescriptor.sentinel(bins.size)
    return NormalizedDescriptor(bins=bins / norm)


def meaningful_threshold(
    raw: RawDescriptor, policy: ClampPolicy, cfg: AContrarioConfig, grid: HistogramGrid
) -> tuple[float, bool]:
    """Raw-domain cap of a meaningful-clamping policy and whether the exact search saturated."""
    tests = acontrario.count_tests(cfg, grid)
    if policy.variant == ClampVariant.MEANINGFUL_EXACT:
        result = acontrario.solve_exact_threshold(cfg, tests, raw.mass, raw.bin_probability)
        return float(result.value), result.saturated
    if policy.variant == ClampVariant.MEANINGFUL_APPROX:
        return acontrario.approx_threshold(tests, raw.mass, raw.bin_probability), False
    raise DescriptorError(f"policy '{policy.name}' has no meaningful threshold")


def clamp_with_details(
    raw: RawDescriptor, policy: ClampPolicy, cfg: AContrarioConfig, grid: HistogramGrid
) -> ClampResult:
    """Clamp a raw descriptor and report the cap, clamped bins and removed mass.

    - none: normalize only
    - lowe: normalize, cap every bin at c, renormalize
    - mc-exact / mc-approx: cap RAW bins at the a contrario threshold of (M, L, tests),
      then normalize

    Raises:
        DescriptorError: If the descriptor length does not match the grid
        DomainError: Propagated from the threshold computations
    """
    if raw.bin_count != grid.bin_count:
        raise DescriptorError(
            f"descriptor has {raw.bin_count} bins but grid {grid.label} has {grid.bin_count}"
        )
    if raw.mass == 0:
        return ClampResult(descriptor=NormalizedDescriptor.sentinel(raw.bin_count))

    if policy.variant == ClampVariant.NONE:
        return ClampResult(descriptor=normalize(raw))

    if policy.variant == ClampVariant.LOWE:
        source = normalize(raw).bins
        threshold, saturated = policy.c, False
    else:
        source = raw.bins
        threshold, saturated = meaningful_threshold(raw, policy, cfg, grid)

    capped = np.minimum(source, threshold)
    source_total = float(source.sum())
    removed = (source_total - float(capped.sum())) / source_total if source_total > 0 else 0.0
    result = ClampResult(
        descriptor=_unit(capped),
        threshold=threshold,
        clamped_bins=int(np.count_nonzero(source > threshold)),
        removed_fraction=min(1.0, max(0.0, removed)),
        saturated=saturated,
    )
    logger.debug(
        "Descriptor clamped",
        extra={
            "policy": policy.name,
            "mass": raw.mass,
            "threshold": threshold,
            "clamped_bins": result.clamped_bins,
            "saturated": saturated,
        },
    )
    return result


def clamp(
    raw: RawDescriptor, policy: ClampPolicy, cfg: AContrarioConfig, grid: HistogramGrid
) -> NormalizedDescriptor:
    """Apply a clamping policy and return the unit descriptor."""
    return clamp_with_details(raw, policy, cfg, grid).descriptor
