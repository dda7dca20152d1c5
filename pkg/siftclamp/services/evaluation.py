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
"""Ground truth from homographies, precision-recall curves, AP and mAP.

Key Functions:
- local_affine(): first-order approximation of a homography at a point
- region_overlap(): intersection over union of a mapped frame region and a frame region
- correspondences(): one-to-one ground-truth pairs (greedy on decreasing overlap)
- sweep_thresholds(): the uniform distance sweep of the PR curve
- pr_curve(): recall / 1-precision at every swept threshold
- average_precision(): interpolated-precision area, zero when nothing matched
- mean_ap(): arithmetic mean of APs
"""

import logging
from collections.abc import Iterable, Mapping
from collections.abc import Sequence as SequenceABC

import numpy as np

from siftclamp.exceptions import EvaluationError
from siftclamp.models.evaluation import APResult, FeatureFrame, Homography, MatchSet, PRCurve
from siftclamp.services.matching import matches_at_threshold

logger = logging.getLogger(__name__)

CORRESPONDENCE_OVERLAP = 0.5
COARSE_RESOLUTION = 64
FINE_RESOLUTION = 256
REFINE_MARGIN = 0.05
JACOBIAN_TOLERANCE = 1e-12
# Nudge above the largest finite distance so the strict "<" admits it at the last threshold
SWEEP_EPSILON = 1e-9


def map_points(h: Homography, points: np.ndarray) -> np.ndarray:
    """Apply a homography to an (n, 2) array of (x, y) points."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    homogeneous = np.column_stack([points, np.ones(len(points))]) @ h.matrix.T
    return homogeneous[:, :2] / homogeneous[:, 2:3]


def local_affine(h: Homography, x: float, y: float) -> tuple[np.ndarray, np.ndarray] | None:
    """Mapped point and 2x2 Jacobian of h at (x, y); None where the map degenerates."""
    m = h.matrix
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) < JACOBIAN_TOLERANCE:
        return None
    u = (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w
    v = (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w
    jacobian = np.array(
        [
            [(m[0, 0] - u * m[2, 0]) / w, (m[0, 1] - u * m[2, 1]) / w],
            [(m[1, 0] - v * m[2, 0]) / w, (m[1, 1] - v * m[2, 1]) / w],
        ]
    )
    if abs(float(np.linalg.det(jacobian))) < JACOBIAN_TOLERANCE:
        return None
    return np.array([u, v]), jacobian


def _ellipse_extent(jacobian: np.ndarray, radius: float) -> np.ndarray:
    """Half-widths along x and y of the image of a disc of this radius under the Jacobian."""
    return radius * np.sqrt(np.sum(jacobian**2, axis=1))


def _rasterized_iou(
    center_a: np.ndarray,
    inverse_jacobian: np.ndarray,
    radius_a: float,
    extent_a: np.ndarray,
    center_b: np.ndarray,
    radius_b: float,
    resolution: int,
) -> float:
    lower = np.minimum(center_a - extent_a, center_b - radius_b)
    upper = np.maximum(center_a + extent_a, center_b + radius_b)
    xs = lower[0] + (np.arange(resolution) + 0.5) * (upper[0] - lower[0]) / resolution
    ys = lower[1] + (np.arange(resolution) + 0.5) * (upper[1] - lower[1]) / resolution
    grid_x, grid_y = np.meshgrid(xs, ys)

    dx_a, dy_a = grid_x - center_a[0], grid_y - center_a[1]
    u = inverse_jacobian[0, 0] * dx_a + inverse_jacobian[0, 1] * dy_a
    v = inverse_jacobian[1, 0] * dx_a + inverse_jacobian[1, 1] * dy_a
    inside_a = u * u + v * v <= radius_a * radius_a
    inside_b = (grid_x - center_b[0]) ** 2 + (grid_y - center_b[1]) ** 2 <= radius_b * radius_b

    union = np.count_nonzero(inside_a | inside_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(inside_a & inside_b) / union


def region_overlap(fa: FeatureFrame, fb: FeatureFrame, h: Homography) -> float:
    """Intersection over union of frame A's disc mapped into image B and frame B's disc.

    The disc of radius fa.scale is mapped through the local affine approximation of h
    at (fa.x, fa.y), giving an ellipse. Both regions are rasterized on a 64 x 64 grid
    over their joint bounding box, refined to 256 x 256 near the 0.5 decision boundary.
    A degenerate local affine yields 0.
    """
    affine = local_affine(h, fa.x, fa.y)
    if affine is None:
        return 0.0
    center_a, jacobian = affine
    extent_a = _ellipse_extent(jacobian, fa.scale)
    center_b = np.array([fb.x, fb.y])
    if np.any(np.abs(center_a - center_b) > extent_a + fb.scale):
        return 0.0
    inverse_jacobian = np.linalg.inv(jacobian)

    overlap = _rasterized_iou(
        center_a, inverse_jacobian, fa.scale, extent_a, center_b, fb.scale, COARSE_RESOLUTION
    )
    if abs(overlap - CORRESPONDENCE_OVERLAP) < REFINE_MARGIN:
        overlap = _rasterized_iou(
            center_a, inverse_jacobian, fa.scale, extent_a, center_b, fb.scale, FINE_RESOLUTION
        )
    return overlap


def correspondences(
    frames_a: SequenceABC[FeatureFrame],
    frames_b: SequenceABC[FeatureFrame],
    h: Homography,
    min_overlap: float = CORRESPONDENCE_OVERLAP,
) -> set[tuple[int, int]]:
    """One-to-one ground-truth pairs with overlap > min_overlap.

    Candidates are taken greedily in decreasing overlap order (ties by index), and a
    feature joins at most one correspondence.
    """
    if not frames_a or not frames_b:
        return set()

    centers_b = np.array([[frame.x, frame.y] for frame in frames_b])
    radii_b = np.array([frame.scale for frame in frames_b])

    candidates: list[tuple[float, int, int]] = []
    for index_a, frame_a in enumerate(frames_a):
        affine = local_affine(h, frame_a.x, frame_a.y)
        if affine is None:
            continue
        center_a, jacobian = affine
        reach = _ellipse_extent(jacobian, frame_a.scale)
        near = np.all(np.abs(centers_b - center_a) <= reach + radii_b[:, None], axis=1)
        for index_b in np.flatnonzero(near):
            overlap = region_overlap(frame_a, frames_b[index_b], h)
            if overlap > min_overlap:
                candidates.append((overlap, index_a, int(index_b)))

    candidates.sort(key=lambda item: (-item[0], item[1], item[2]))
    used_a: set[int] = set()
    used_b: set[int] = set()
    pairs: set[tuple[int, int]] = set()
    for _, index_a, index_b in candidates:
        if index_a in used_a or index_b in used_b:
            continue
        used_a.add(index_a)
        used_b.add(index_b)
        pairs.add((index_a, index_b))

    logger.debug(
        "Ground-truth correspondences computed",
        extra={
            "frames_a": len(frames_a),
            "frames_b": len(frames_b),
            "candidates": len(candidates),
            "correspondences": len(pairs),
        },
    )
    return pairs


def sweep_thresholds(distances: np.ndarray, sample_count: int = 100) -> np.ndarray:
    """Strictly increasing thresholds, uniform over [min, max + 1e-9] of the finite distances."""
    if sample_count < 2:
        raise EvaluationError(f"a sweep needs at least 2 samples, got {sample_count}")
    finite = distances[np.isfinite(distances)]
    if finite.size == 0:
        # nothing can match; any increasing positive sweep will do
        return np.linspace(1.0, 2.0, sample_count)
    return np.linspace(float(finite.min()), float(finite.max()) + SWEEP_EPSILON, sample_count)


def threshold_matchsets(distances: np.ndarray, thresholds: Iterable[float]) -> list[MatchSet]:
    """Match sets of the distance table at every threshold of a sweep.

    A non-positive threshold admits nothing and yields an empty match set.
    """
    matchsets = []
    for t in thresholds:
        if t > 0:
            matchsets.append(matches_at_threshold(distances, float(t)))
        else:
            empty = np.zeros(0, dtype=np.int64)
            matchsets.append(
                MatchSet(index_a=empty, index_b=empty, distance=np.zeros(0), threshold=1e-300)
            )
    return matchsets


def pr_curve(
    matchsets: SequenceABC[MatchSet],
    correspondence_pairs: set[tuple[int, int]],
    thresholds: np.ndarray | None = None,
) -> PRCurve:
    """Recall and 1-precision of each match set against the ground-truth pairs.

    recall(t) = #correct(t) / #correspondences, and 1-precision(t) =
    #false(t) / (#correct(t) + #false(t)); a match is correct iff its index pair is a
    correspondence. Points without matches have an undefined (NaN) precision, and with
    no correspondences recall stays 0, which leads to AP = 0.
    """
    sample_count = len(matchsets)
    if sample_count == 0:
        raise EvaluationError("a PR curve needs at least one threshold")
    if thresholds is None:
        thresholds = np.array([matchset.threshold for matchset in matchsets])

    correct = np.zeros(sample_count, dtype=np.int64)
    false = np.zeros(sample_count, dtype=np.int64)
    for position, matchset in enumerate(matchsets):
        hits = sum(
            (int(a), int(b)) in correspondence_pairs
            for a, b in zip(matchset.index_a, matchset.index_b, strict=True)
        )
        correct[position] = hits
        false[position] = len(matchset) - hits

    total = correct + false
    count = len(correspondence_pairs)
    recall = correct / count if count else np.zeros(sample_count)
    with np.errstate(invalid="ignore", divide="ignore"):
        one_minus_precision = np.where(total > 0, false / np.maximum(total, 1), np.nan)

    return PRCurve(
        thresholds=np.asarray(thresholds, dtype=np.float64),
        recall=np.asarray(recall, dtype=np.float64),
        one_minus_precision=one_minus_precision,
        correct_matches=correct,
        false_matches=false,
        correspondences=count,
        sample_count=sample_count,
    )


def average_precision(curve: PRCurve, recall_samples: int | None = None) -> APResult:
    """Area under the precision-recall curve by interpolated precision.

    At each of recall_samples (default: the curve's sample count) evenly spaced recall
    positions in [0, 1], take the largest precision among points whose recall is at
    least that position (0 if none), and average. No matches, or no correspondences,
    give AP = 0.
    """
    samples = recall_samples or curve.sample_count
    audit = {
        "correct_matches": [int(value) for value in curve.correct_matches],
        "false_matches": [int(value) for value in curve.false_matches],
        "correspondences": curve.correspondences,
    }
    if curve.correspondences == 0 or not curve.has_matches:
        return APResult(ap=0.0, **audit)

    defined = (curve.correct_matches + curve.false_matches) > 0
    recall = curve.recall[defined]
    precision = curve.precision[defined]

    positions = np.linspace(0.0, 1.0, samples)
    interpolated = np.zeros(samples)
    for index, position in enumerate(positions):
        reached = recall >= position
        if np.any(reached):
            interpolated[index] = float(precision[reached].max())

    ap = float(np.clip(interpolated.mean(), 0.0, 1.0))
    return APResult(ap=ap, **audit)


def mean_ap(results: Iterable[APResult | float]) -> float:
    """Arithmetic mean of the APs of a group (APResult records or bare AP values).

    Raises:
        EvaluationError: If the group is empty
    """
    values = [result.ap if isinstance(result, APResult) else float(result) for result in results]
    if not values:
        raise EvaluationError("mean AP of an empty group is undefined")
    return float(np.mean(values))


def mean_ap_by_group(groups: Mapping[str, Iterable[APResult | float]]) -> dict[str, float]:
    """mAP of every non-empty group, keyed like the input."""
    summary: dict[str, float] = {}
    for name, results in groups.items():
        results = list(results)
        if results:
            summary[name] = mean_ap(results)
    return summary
