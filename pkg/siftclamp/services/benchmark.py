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
"""Benchmark orchestration: describe -> match -> evaluate -> aggregate.

This module provides:
1. BenchmarkService.describe: unit descriptors of the frames of one image under
   several clamping policies (patches and raw histograms are computed once)
2. BenchmarkService.evaluate_pair: per-policy AP and PR curve of one image pair
3. BenchmarkService.run: concurrent evaluation of many pairs and the report

Frames whose measurement region leaves the image are skipped before any policy
sees them, so every policy of a pair is evaluated on the same feature lists and
the same ground-truth correspondences. Reports are sorted by (sequence, pair,
policy), independent of scheduling.
"""

import contextvars
import logging
from collections import defaultdict
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from pydantic import ValidationError

from siftclamp.exceptions import PatchOutOfBoundsError, SiftClampError
from siftclamp.models.benchmark import PairEvaluation, PipelineConfig
from siftclamp.models.dataset import PairInput, PairSpec
from siftclamp.models.descriptor import ClampPolicy, RawDescriptor
from siftclamp.models.evaluation import DescriptorSet, FeatureFrame, PRCurve
from siftclamp.models.report import ALL_IMAGES, BenchReport, CategorySummary, PairResult
from siftclamp.services import dataset, descriptor, evaluation, matching


class BenchmarkService:
    """Runs the matching benchmark for one pipeline configuration.

    The service holds no per-pair state, so one instance can evaluate pairs
    from several threads at once.
    """

    def __init__(self, config: PipelineConfig):
        self.logger = logging.getLogger(__name__)
        self.config = config

    def raw_descriptors(
        self, image: np.ndarray, frames: Iterable[FeatureFrame]
    ) -> tuple[list[FeatureFrame], list[RawDescriptor]]:
        """Raw histograms of the frames that fit in the image, with those frames."""
        kept: list[FeatureFrame] = []
        raws: list[RawDescriptor] = []
        skipped = 0
        for frame in frames:
            try:
                patch = dataset.extract_patch(
                    image, frame, self.config.grid, self.config.magnification
                )
            except PatchOutOfBoundsError as e:
                skipped += 1
                self.logger.debug(
                    "Frame skipped",
                    extra={"x": e.x, "y": e.y, "radius": e.radius, "reason": "out of bounds"},
                )
                continue
            kept.append(frame)
            raws.append(descriptor.build_descriptor(patch, self.config.grid))
        if skipped:
            self.logger.debug(
                "Frames outside the image were skipped",
                extra={"kept": len(kept), "skipped": skipped},
            )
        return kept, raws

    def clamp_all(
        self, frames: list[FeatureFrame], raws: list[RawDescriptor], policy: ClampPolicy
    ) -> tuple[DescriptorSet, float]:
        """Descriptor set under one policy and the mean fraction of mass it removed."""
        bin_count = self.config.grid.bin_count
        if not raws:
            return DescriptorSet(frames=[], descriptors=np.zeros((0, bin_count))), 0.0
        results = [
            descriptor.clamp_with_details(raw, policy, self.config.acontrario, self.config.grid)
            for raw in raws
        ]
        saturated = sum(result.saturated for result in results)
        if saturated:
            self.logger.debug(
                "Exact thresholds saturated",
                extra={"policy": policy.name, "saturated": saturated, "descriptors": len(raws)},
            )
        descriptors = np.vstack([result.descriptor.bins for result in results])
        removed = float(np.mean([result.removed_fraction for result in results]))
        return DescriptorSet(frames=frames, descriptors=descriptors), removed

    def describe(
        self, image: np.ndarray, frames: Iterable[FeatureFrame]
    ) -> dict[str, tuple[DescriptorSet, float]]:
        """Descriptor set and mean removed mass of every configured policy."""
        kept, raws = self.raw_descriptors(image, frames)
        return {policy.name: self.clamp_all(kept, raws, policy) for policy in self.config.policies}

    def _score(
        self,
        set_a: DescriptorSet,
        set_b: DescriptorSet,
        pairs: set[tuple[int, int]],
    ) -> tuple[PRCurve, float]:
        if len(set_a) == 0 or len(set_b) == 0:
            curve = PRCurve.empty(self.config.sample_count, len(pairs))
        else:
            distances = matching.pairwise_distances(set_a, set_b)
            thresholds = evaluation.sweep_thresholds(distances, self.config.sample_count)
            curve = evaluation.pr_curve(
                evaluation.threshold_matchsets(distances, thresholds), pairs, thresholds
            )
        return curve, evaluation.average_precision(curve).ap

    def evaluate_pair(self, pair: PairInput) -> PairEvaluation:
        """AP and PR curve of every configured policy on one pair."""
        described_a = self.describe(pair.image_a, pair.frames_a)
        described_b = self.describe(pair.image_b, pair.frames_b)
        first = self.config.policies[0].name
        frames_a = described_a[first][0].frames
        frames_b = described_b[first][0].frames
        pairs = evaluation.correspondences(frames_a, frames_b, pair.homography)

        rows: list[PairResult] = []
        curves: dict[str, PRCurve] = {}
        for policy in self.config.policies:
            set_a, removed_a = described_a[policy.name]
            set_b, removed_b = described_b[policy.name]
            curve, ap = self._score(set_a, set_b, pairs)
            curves[policy.name] = curve
            rows.append(
                PairResult(
                    sequence=pair.sequence,
                    pair_index=pair.pair_index,
                    policy=policy.name,
                    ap=ap,
                    correspondences=len(pairs),
                    correct_matches=int(curve.correct_matches[-1]),
                    false_matches=int(curve.false_matches[-1]),
                    features_a=len(set_a),
                    features_b=len(set_b),
                    clamped_fraction=(removed_a + removed_b) / 2.0,
                )
            )

        self.logger.info(
            "Pair evaluated",
            extra={
                "sequence": pair.sequence,
                "pair": pair.pair_index,
                "correspondences": len(pairs),
                "features_a": len(frames_a),
                "features_b": len(frames_b),
                "ap": {row.policy: round(row.ap, 6) for row in rows},
            },
        )
        return PairEvaluation(
            sequence=pair.sequence, pair_index=pair.pair_index, rows=rows, curves=curves
        )

    def _evaluate_item(self, item: PairInput | PairSpec) -> PairEvaluation | str:
        """Evaluate a loaded or on-disk pair; a failure comes back as a skip message."""
        label = item.label
        try:
            pair = dataset.load_pair(item) if isinstance(item, PairSpec) else item
            return self.evaluate_pair(pair)
        except (SiftClampError, OSError, ValidationError) as e:
            self.logger.warning("Pair skipped", extra={"pair": label, "error": str(e)})
            return f"{label}: {e}"

    def run(
        self,
        items: Iterable[PairInput | PairSpec],
        jobs: int = 1,
        skipped: Iterable[str] = (),
    ) -> tuple[BenchReport, list[PairEvaluation]]:
        """Evaluate pairs with up to `jobs` worker threads and aggregate the report."""
        items = list(items)
        skipped_labels = list(skipped)
        if jobs > 1 and len(items) > 1:
            # each task runs in its own copy of the caller context so log records keep the run id
            with ThreadPoolExecutor(max_workers=jobs) as executor:
                futures = [
                    executor.submit(contextvars.copy_context().run, self._evaluate_item, item)
                    for item in items
                ]
                outcomes = [future.result() for future in futures]
        else:
            outcomes = [self._evaluate_item(item) for item in items]

        evaluations = [outcome for outcome in outcomes if isinstance(outcome, PairEvaluation)]
        skipped_labels.extend(outcome for outcome in outcomes if isinstance(outcome, str))
        evaluations.sort(key=lambda e: (e.sequence, e.pair_index))

        rows = [row for item in evaluations for row in item.rows]
        report = summarize(rows, self.config.policy_names, skipped_labels)
        self.logger.info(
            "Benchmark finished",
            extra={
                "pairs": len(evaluations),
                "skipped": len(skipped_labels),
                "jobs": jobs,
                "map": report.overall.map_by_policy if report.overall else {},
            },
        )
        return report, evaluations


def summarize(
    rows: Iterable[PairResult], policies: list[str], skipped: Iterable[str] = ()
) -> BenchReport:
    """Per-category and all-images mAP of each policy over the given pair rows."""
    rows = sorted(rows, key=lambda row: row.sort_key)
    by_category: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    overall: dict[str, list[float]] = defaultdict(list)
    pair_keys: dict[str, set[int]] = defaultdict(set)
    for row in rows:
        by_category[row.sequence][row.policy].append(row.ap)
        overall[row.policy].append(row.ap)
        pair_keys[row.sequence].add(row.pair_index)

    def _means(groups: dict[str, list[float]]) -> dict[str, float]:
        return {policy: evaluation.mean_ap(groups[policy]) for policy in policies if groups[policy]}

    categories = [
        CategorySummary(
            category=category,
            pair_count=len(pair_keys[category]),
            map_by_policy=_means(by_category[category]),
        )
        for category in sorted(by_category)
    ]
    total_pairs = sum(len(indices) for indices in pair_keys.values())
    return BenchReport(
        policies=policies,
        pairs=rows,
        categories=categories,
        overall=(
            CategorySummary(
                category=ALL_IMAGES, pair_count=total_pairs, map_by_policy=_means(overall)
            )
            if rows
            else None
        ),
        skipped=sorted(skipped),
    )
