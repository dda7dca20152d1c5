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
"""Descriptor distances and threshold matching between two images."""

import logging

import numpy as np
from scipy.spatial.distance import cdist

from siftclamp.exceptions import MatchingError
from siftclamp.models.evaluation import DescriptorSet, MatchSet

logger = logging.getLogger(__name__)


def pairwise_distances(a: DescriptorSet, b: DescriptorSet) -> np.ndarray:
    """Euclidean distance table (len(a) x len(b)).

    All-zero sentinel descriptors are at +inf from everything, themselves included.

    Raises:
        MatchingError: If either set is empty or the descriptor lengths differ
    """
    if len(a) == 0 or len(b) == 0:
        raise MatchingError(f"cannot match empty descriptor sets ({len(a)} x {len(b)})")
    if a.descriptor_length != b.descriptor_length:
        raise MatchingError(
            f"descriptor lengths differ: {a.descriptor_length} vs {b.descriptor_length}"
        )
    distances = cdist(a.descriptors, b.descriptors, metric="euclidean")
    sentinel_a = ~np.any(a.descriptors, axis=1)
    sentinel_b = ~np.any(b.descriptors, axis=1)
    distances[sentinel_a, :] = np.inf
    distances[:, sentinel_b] = np.inf
    if sentinel_a.any() or sentinel_b.any():
        logger.debug(
            "Sentinel descriptors excluded from matching",
            extra={"sentinels_a": int(sentinel_a.sum()), "sentinels_b": int(sentinel_b.sum())},
        )
    return distances


def matches_at_threshold(distances: np.ndarray, t: float) -> MatchSet:
    """Every pair with distance strictly below t, ordered by (index_a, index_b).

    Threshold matching admits several matches per feature.
    """
    if not t > 0:
        raise MatchingError(f"match threshold must be positive, got {t}")
    index_a, index_b = np.nonzero(distances < t)
    return MatchSet(
        index_a=index_a,
        index_b=index_b,
        distance=distances[index_a, index_b],
        threshold=float(t),
    )
