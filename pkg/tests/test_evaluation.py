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
"""Tests for region overlap, correspondences, PR curves and average precision."""

import math

import numpy as np
import pytest

from siftclamp.exceptions import EvaluationError
from siftclamp.models.evaluation import APResult, FeatureFrame, Homography
from siftclamp.services import evaluation
from tests.conftest import lattice_frames

INF = math.inf


def similarity(angle_deg: float, zoom: float, tx: float, ty: float) -> Homography:
    angle = math.radians(angle_deg)
    c, s = zoom * math.cos(angle), zoom * math.sin(angle)
    return Homography(matrix=[[c, -s, tx], [s, c, ty], [0.0, 0.0, 1.0]])


def curve_for(distances, pairs, thresholds):
    distances = np.asarray(distances, dtype=np.float64)
    matchsets = evaluation.threshold_matchsets(distances, thresholds)
    return evaluation.pr_curve(matchsets, pairs, np.asarray(thresholds, dtype=np.float64))


def test_local_affine_of_identity():
    """Test that the identity maps a point to itself with a unit Jacobian."""
    center, jacobian = evaluation.local_affine(Homography.identity(), 12.0, 30.0)
    np.testing.assert_allclose(center, [12.0, 30.0])
    np.testing.assert_allclose(jacobian, np.eye(2))


def test_local_affine_matches_finite_differences():
    """Test the analytic Jacobian of a projective map against finite differences."""
    h = Homography(matrix=[[1.1, 0.1, 5.0], [-0.05, 0.95, -3.0], [1e-4, -2e-4, 1.0]])
    x, y, step = 40.0, 25.0, 1e-5
    _, jacobian = evaluation.local_affine(h, x, y)
    points = np.array([[x + step, y], [x - step, y], [x, y + step], [x, y - step]])
    mapped = evaluation.map_points(h, points)
    numeric = np.column_stack(
        [(mapped[0] - mapped[1]) / (2 * step), (mapped[2] - mapped[3]) / (2 * step)]
    )
    np.testing.assert_allclose(jacobian, numeric, rtol=1e-6)


def test_local_affine_degenerates_on_the_line_at_infinity():
    """Test that points mapped to infinity have no local affine."""
    h = Homography(matrix=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.01, 0.0, 1.0]])
    assert evaluation.local_affine(h, -100.0, 0.0) is None


def test_identical_regions_overlap_fully():
    """Test that a frame overlaps itself completely under the identity."""
    frame = FeatureFrame(x=50.0, y=40.0, scale=6.0)
    assert evaluation.region_overlap(frame, frame, Homography.identity()) == pytest.approx(1.0)


def test_concentric_regions_overlap_by_area_ratio():
    """Test that circles of radius r and 2r overlap by a quarter."""
    small = FeatureFrame(x=50.0, y=50.0, scale=5.0)
    large = FeatureFrame(x=50.0, y=50.0, scale=10.0)
    overlap = evaluation.region_overlap(small, large, Homography.identity())
    assert overlap == pytest.approx(0.25, abs=0.02)


def test_disjoint_regions_do_not_overlap():
    """Test that regions farther apart than their radii sum have zero overlap."""
    fa = FeatureFrame(x=10.0, y=10.0, scale=3.0)
    fb = FeatureFrame(x=20.0, y=10.0, scale=3.0)
    assert evaluation.region_overlap(fa, fb, Homography.identity()) == 0.0


def test_overlap_follows_the_homography():
    """Test that a translated frame overlaps its image under the translation."""
    h = Homography(matrix=[[1.0, 0.0, 7.0], [0.0, 1.0, -4.0], [0.0, 0.0, 1.0]])
    fa = FeatureFrame(x=30.0, y=30.0, scale=4.0)
    fb = FeatureFrame(x=37.0, y=26.0, scale=4.0)
    assert evaluation.region_overlap(fa, fb, h) == pytest.approx(1.0)
    assert evaluation.region_overlap(fa, fa, h) < 0.5


def test_overlap_symmetric_under_inverse():
    """Test that overlap(fa, fb, h) matches overlap(fb, fa, h^-1) within rasterization error."""
    h = similarity(10.0, 1.1, 4.0, -2.0)
    fa = FeatureFrame(x=50.0, y=50.0, scale=5.0)
    center = evaluation.map_points(h, np.array([[50.0, 50.0]]))[0]
    fb = FeatureFrame(x=float(center[0]) + 2.0, y=float(center[1]), scale=5.5)
    forward = evaluation.region_overlap(fa, fb, h)
    backward = evaluation.region_overlap(fb, fa, h.inverse())
    assert 0.5 < forward < 0.8
    assert forward == pytest.approx(backward, abs=0.02)


def test_correspondences_of_identical_lists(texture):
    """Test that identical frames under the identity pair up with themselves."""
    frames = lattice_frames(texture.shape)
    pairs = evaluation.correspondences(frames, frames, Homography.identity())
    assert pairs == {(i, i) for i in range(len(frames))}


def test_correspondences_with_empty_side():
    """Test that an empty frame list has no correspondences."""
    frames = [FeatureFrame(x=5.0, y=5.0, scale=2.0)]
    assert evaluation.correspondences(frames, [], Homography.identity()) == set()
    assert evaluation.correspondences([], frames, Homography.identity()) == set()


def test_correspondences_are_greedy_one_to_one():
    """Test that two frames overlapping one target keep only the larger overlap."""
    target = FeatureFrame(x=60.0, y=60.0, scale=10.0)
    strong = FeatureFrame(x=60.0, y=60.0, scale=10.0 * math.sqrt(0.9))
    weak = FeatureFrame(x=60.0, y=60.0, scale=10.0 * math.sqrt(0.6))
    identity = Homography.identity()
    assert evaluation.region_overlap(strong, target, identity) == pytest.approx(0.9, abs=0.02)
    assert evaluation.region_overlap(weak, target, identity) == pytest.approx(0.6, abs=0.02)
    assert evaluation.correspondences([weak, strong], [target], identity) == {(1, 0)}


def test_sweep_thresholds_span_finite_distances():
    """Test that the sweep covers [min, max] of the finite distances, nudged at the top."""
    distances = np.array([[0.5, 1.5], [INF, 1.0]])
    sweep = evaluation.sweep_thresholds(distances, 5)
    assert sweep[0] == 0.5
    assert sweep[-1] == pytest.approx(1.5 + 1e-9)
    assert sweep[-1] > 1.5
    assert np.all(np.diff(sweep) > 0)


def test_sweep_without_finite_distances():
    """Test that an all-infinite table still gets an increasing sweep."""
    sweep = evaluation.sweep_thresholds(np.full((2, 2), INF), 4)
    np.testing.assert_allclose(sweep, [1.0, 4 / 3, 5 / 3, 2.0])


def test_sweep_needs_two_samples():
    """Test that a single-sample sweep is rejected."""
    with pytest.raises(EvaluationError):
        evaluation.sweep_thresholds(np.zeros((1, 1)), 1)


def test_pr_curve_single_correct_match():
    """Test that one correct match ends the curve at recall 1 and precision 1."""
    distances = np.array([[0.2]])
    thresholds = evaluation.sweep_thresholds(distances, 100)
    curve = curve_for(distances, {(0, 0)}, thresholds)
    assert curve.sample_count == 100
    assert curve.recall[-1] == 1.0
    assert curve.one_minus_precision[-1] == 0.0
    # the strict threshold does not admit the match at the lowest sample
    assert curve.recall[0] == 0.0
    assert math.isnan(curve.one_minus_precision[0])


def test_pr_curve_all_false():
    """Test that false matches keep recall at zero and 1-precision at one."""
    distances = np.array([[0.1, INF], [INF, 0.3]])
    curve = curve_for(distances, {(0, 1)}, [0.2, 0.4])
    np.testing.assert_array_equal(curve.recall, [0.0, 0.0])
    np.testing.assert_array_equal(curve.one_minus_precision, [1.0, 1.0])


def test_pr_curve_three_steps():
    """Test the hand-enumerated correct, false, correct curve."""
    distances = np.array([[0.1, 0.2], [INF, 0.3]])
    curve = curve_for(distances, {(0, 0), (1, 1)}, [0.15, 0.25, 0.35])
    np.testing.assert_allclose(curve.recall, [0.5, 0.5, 1.0])
    np.testing.assert_allclose(curve.precision, [1.0, 0.5, 2 / 3])
    np.testing.assert_array_equal(curve.correct_matches, [1, 1, 2])
    np.testing.assert_array_equal(curve.false_matches, [0, 1, 1])
    assert curve.correspondences == 2


def test_pr_curve_rejects_empty_sweep():
    """Test that a curve needs at least one match set."""
    with pytest.raises(EvaluationError):
        evaluation.pr_curve([], {(0, 0)})


def test_recall_non_decreasing(rng):
    """Test that recall and match counts never fall as the threshold rises."""
    distances = rng.uniform(0.0, 2.0, (15, 15))
    pairs = {(i, i) for i in range(15)}
    curve = curve_for(distances, pairs, evaluation.sweep_thresholds(distances, 50))
    assert np.all(np.diff(curve.recall) >= 0)
    assert np.all(np.diff(curve.correct_matches + curve.false_matches) >= 0)


def test_ap_of_perfect_curve():
    """Test that a strategy whose every match is correct has AP 1 at any granularity."""
    distances = np.array([[0.1, INF], [INF, 0.2]])
    for samples in (2, 10, 100):
        thresholds = evaluation.sweep_thresholds(distances, samples)
        curve = curve_for(distances, {(0, 0), (1, 1)}, thresholds)
        assert evaluation.average_precision(curve).ap == pytest.approx(1.0)


def test_ap_without_matches_is_zero():
    """Test that no match at any threshold gives AP 0."""
    distances = np.full((2, 2), INF)
    curve = curve_for(distances, {(0, 0)}, evaluation.sweep_thresholds(distances, 10))
    result = evaluation.average_precision(curve)
    assert result.ap == 0.0
    assert result.correct_matches == [0] * 10


def test_ap_of_three_step_curve():
    """Test interpolated precision on the hand curve at 3 and 11 recall samples."""
    distances = np.array([[0.1, 0.2], [INF, 0.3]])
    curve = curve_for(distances, {(0, 0), (1, 1)}, [0.15, 0.25, 0.35])
    assert evaluation.average_precision(curve).ap == pytest.approx(8 / 9)
    assert evaluation.average_precision(curve, recall_samples=11).ap == pytest.approx(
        (6 + 5 * 2 / 3) / 11
    )


def test_ap_without_correspondences_is_zero():
    """Test that a pair without ground truth scores zero even when matches exist."""
    distances = np.array([[0.1]])
    curve = curve_for(distances, set(), [0.2, 0.3])
    assert evaluation.average_precision(curve).ap == 0.0


def test_ap_false_before_correct():
    """Test a false match ranked before the only correct one."""
    distances = np.array([[0.2, 0.1]])
    curve = curve_for(distances, {(0, 0)}, [0.15, 0.25])
    assert evaluation.average_precision(curve).ap == pytest.approx(0.5)


def test_ap_invariant_to_monotone_reparameterization(rng):
    """Test that squaring distances and thresholds together leaves AP unchanged."""
    distances = rng.uniform(0.1, 1.5, (10, 10))
    pairs = {(i, i) for i in range(10)}
    thresholds = evaluation.sweep_thresholds(distances, 40)
    plain = evaluation.average_precision(curve_for(distances, pairs, thresholds))
    squared = evaluation.average_precision(curve_for(distances**2, pairs, thresholds**2))
    assert plain.ap == pytest.approx(squared.ap)
    assert 0.0 <= plain.ap <= 1.0


def test_mean_ap():
    """Test the arithmetic mean over records and bare values."""
    assert evaluation.mean_ap([APResult(ap=0.7)]) == pytest.approx(0.7)
    assert evaluation.mean_ap([0.2, 0.4]) == pytest.approx(0.3)
    assert evaluation.mean_ap([APResult(ap=0.2), 0.4]) == pytest.approx(0.3)


def test_mean_ap_of_empty_group():
    """Test that an empty group has no mean."""
    with pytest.raises(EvaluationError):
        evaluation.mean_ap([])


def test_mean_ap_by_group_skips_empty_groups():
    """Test per-group means, leaving out groups without results."""
    summary = evaluation.mean_ap_by_group({"bikes": [0.5, 1.0], "boat": [], "wall": [0.1]})
    assert summary == {"bikes": pytest.approx(0.75), "wall": pytest.approx(0.1)}
