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
"""Report writers: per-pair and summary CSV, a JSON mirror, and SVG plots.

CSV and JSON carry no timestamps and format every float at a fixed precision,
so identical runs write identical bytes.
"""

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from siftclamp.models.benchmark import PairEvaluation  # noqa: E402
from siftclamp.models.report import ALL_IMAGES, BenchReport, CategorySummary  # noqa: E402

logger = logging.getLogger(__name__)

FLOAT_DIGITS = 6
PAIR_COLUMNS = (
    "sequence",
    "pair",
    "policy",
    "ap",
    "correspondences",
    "correct_matches",
    "false_matches",
    "features_a",
    "features_b",
    "clamped_fraction",
)

# stable element ids in the SVG output
matplotlib.rcParams["svg.hashsalt"] = "sift-clamp"


def _fixed(value: float) -> str:
    return f"{value:.{FLOAT_DIGITS}f}"


def _rounded(value: Any) -> Any:
    """Round every float of a JSON-like structure to FLOAT_DIGITS."""
    if isinstance(value, float):
        return round(value, FLOAT_DIGITS)
    if isinstance(value, dict):
        return {key: _rounded(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_rounded(item) for item in value]
    return value


def pairs_csv(report: BenchReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(PAIR_COLUMNS)
    for row in report.pairs:
        writer.writerow(
            [
                row.sequence,
                row.pair_index,
                row.policy,
                _fixed(row.ap),
                row.correspondences,
                row.correct_matches,
                row.false_matches,
                row.features_a,
                row.features_b,
                _fixed(row.clamped_fraction),
            ]
        )
    return buffer.getvalue()


def _summary_rows(report: BenchReport) -> list[CategorySummary]:
    return report.categories + ([report.overall] if report.overall else [])


def summary_csv(report: BenchReport) -> str:
    """One row per category plus the all-images row; one mAP column per policy."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["category", "pairs", *report.policies])
    for summary in _summary_rows(report):
        writer.writerow(
            [
                summary.category,
                summary.pair_count,
                *(
                    _fixed(summary.map_by_policy[policy])
                    if policy in summary.map_by_policy
                    else ""
                    for policy in report.policies
                ),
            ]
        )
    return buffer.getvalue()


def report_json(report: BenchReport) -> str:
    return json.dumps(_rounded(report.model_dump(mode="json")), indent=2, sort_keys=True) + "\n"


def format_table(report: BenchReport) -> str:
    """Plain-text mAP table for the terminal, followed by the improvement figures."""
    width = max([len(ALL_IMAGES)] + [len(s.category) for s in report.categories])
    header = f"{'category':<{width}}  " + "  ".join(f"{p:>9}" for p in report.policies)
    lines = [header, "-" * len(header)]
    for summary in _summary_rows(report):
        cells = (
            f"{summary.map_by_policy[p]:9.3f}" if p in summary.map_by_policy else f"{'-':>9}"
            for p in report.policies
        )
        lines.append(f"{summary.category:<{width}}  " + "  ".join(cells))
    for policy, improvement in sorted(report.improvement_percent.items()):
        shown = "n/a (Lowe mAP is 0)" if improvement is None else f"{improvement:+.1f}%"
        lines.append(f"{policy} vs lowe: {shown}")
    if report.skipped:
        lines.append(f"skipped: {len(report.skipped)} pair(s)")
    return "\n".join(lines) + "\n"


def write_tables(report: BenchReport, out_dir: Path | str) -> list[Path]:
    """Write pairs.csv, summary.csv and report.json; return the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, content in (
        ("pairs.csv", pairs_csv(report)),
        ("summary.csv", summary_csv(report)),
        ("report.json", report_json(report)),
    ):
        path = out / name
        path.write_text(content)
        written.append(path)
    logger.info("Report tables written", extra={"out_dir": str(out), "files": len(written)})
    return written


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_pr_curves(evaluation: PairEvaluation, path: Path | str) -> Path:
    """Recall against 1-precision of every policy of one pair."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for row in evaluation.rows:
        curve = evaluation.curves[row.policy]
        defined = curve.correct_matches + curve.false_matches > 0
        ax.plot(
            curve.one_minus_precision[defined],
            curve.recall[defined],
            label=f"{row.policy} (AP {row.ap:.3f})",
        )
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("1 - precision")
    ax.set_ylabel("recall")
    ax.set_title(evaluation.label)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize="small")
    return _save(fig, Path(path))


def plot_ap_scatter(report: BenchReport, path: Path | str, baseline: str = "lowe") -> Path | None:
    """Per-pair AP of each meaningful-clamping policy against the baseline policy.

    Returns None when the report lacks the baseline or any mc-* policy.
    """
    challengers = [p for p in report.policies if p.startswith("mc-")]
    if baseline not in report.policies or not challengers:
        return None
    by_key = {(row.sequence, row.pair_index, row.policy): row.ap for row in report.pairs}
    keys = sorted({(row.sequence, row.pair_index) for row in report.pairs})

    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot([0.0, 1.0], [0.0, 1.0], color="gray", linewidth=0.8, linestyle="--")
    for policy in challengers:
        points = [
            (by_key[(*key, baseline)], by_key[(*key, policy)])
            for key in keys
            if (*key, baseline) in by_key and (*key, policy) in by_key
        ]
        if points:
            xs, ys = zip(*points, strict=True)
            ax.scatter(xs, ys, s=14, label=policy)
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel(f"AP ({baseline})")
    ax.set_ylabel("AP (meaningful clamping)")
    ax.legend(loc="lower right", fontsize="small")
    return _save(fig, Path(path))


def write_plots(
    report: BenchReport, evaluations: list[PairEvaluation], out_dir: Path | str
) -> list[Path]:
    """PR curve SVG per pair under out_dir/plots, plus the AP scatter."""
    plots = Path(out_dir) / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    written = [
        plot_pr_curves(item, plots / f"pr_{item.sequence}_1-{item.pair_index}.svg")
        for item in evaluations
    ]
    scatter = plot_ap_scatter(report, plots / "ap_scatter.svg")
    if scatter is not None:
        written.append(scatter)
    logger.info("Plots written", extra={"out_dir": str(plots), "files": len(written)})
    return written
