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
"""Command-line front end: describe, eval, bench, thresholds and serve.

Exit codes:
- 0: success
- 1: the evaluation produced no usable pairs
- 2: input error (missing or malformed files, invalid arguments)

Logs are JSON lines on stderr; tables go to stdout.
"""

import argparse
import logging
import sys
import uuid
from pathlib import Path

from pydantic import ValidationError

from siftclamp.config import Settings, get_settings
from siftclamp.dependencies import (
    build_acontrario_config,
    build_grid,
    build_pipeline,
    parse_policies,
    parse_policy,
)
from siftclamp.exceptions import DatasetError, SiftClampError
from siftclamp.main import run_id_ctx_var, setup_logging
from siftclamp.models.dataset import PairSpec
from siftclamp.services import acontrario, dataset, imageio, report
from siftclamp.services.benchmark import BenchmarkService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NO_PAIRS = 1
EXIT_INPUT_ERROR = 2
DEFAULT_POLICIES = "none,lowe,mc-approx"


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise DatasetError(f"{what} not found: {path}")
    return path


def _pipeline_args(parser: argparse.ArgumentParser, policy_flag: str) -> None:
    parser.add_argument("--grid", help="histogram grid NXxNYxNTHETA (default: GRID)")
    if policy_flag == "single":
        parser.add_argument(
            "--policy", default="mc-approx", help="none, lowe, mc-exact or mc-approx"
        )
    else:
        parser.add_argument(
            "--policies",
            default=DEFAULT_POLICIES,
            help=f"comma-separated policies (default: {DEFAULT_POLICIES})",
        )
    parser.add_argument("--clamp-c", type=float, help="Lowe cap c (default: CLAMP_C)")
    parser.add_argument("--epsilon", type=float, help="detection budget (default: EPSILON)")
    parser.add_argument(
        "--magnification",
        type=float,
        help="measurement region multiplier (default: MAGNIFICATION)",
    )


def _evaluation_args(parser: argparse.ArgumentParser, settings: Settings) -> None:
    parser.add_argument(
        "--sweep-samples", type=int, help="thresholds in the PR sweep (default: SWEEP_SAMPLES)"
    )
    parser.add_argument(
        "--jobs", type=int, default=settings.JOBS, help="pairs evaluated concurrently"
    )
    parser.add_argument(
        "--frames-suffix",
        default=dataset.DEFAULT_FRAMES_SUFFIX,
        help="frame file name suffix, e.g. .fo-1.frames",
    )
    parser.add_argument("--out", type=Path, help="report directory")


def _policies(args: argparse.Namespace, settings: Settings):
    c = settings.CLAMP_C if args.clamp_c is None else args.clamp_c
    if hasattr(args, "policies"):
        return parse_policies(args.policies, c)
    return [parse_policy(args.policy, c)]


def _service(args: argparse.Namespace, settings: Settings) -> BenchmarkService:
    return BenchmarkService(
        build_pipeline(
            settings,
            _policies(args, settings),
            grid=args.grid,
            epsilon=args.epsilon,
            magnification=args.magnification,
            sample_count=getattr(args, "sweep_samples", None),
        )
    )


def cmd_describe(args: argparse.Namespace, settings: Settings) -> int:
    """Describe the frames of one image under one policy and write a .desc file."""
    image_path = _require(args.image, "image")
    frames_path = _require(args.frames, "frames file")
    service = _service(args, settings)
    policy = service.config.policies[0]

    image = imageio.read_pgm(image_path)
    frame_file = dataset.read_frames(frames_path)
    described, removed = service.describe(image, frame_file.frames)[policy.name]

    out = args.out or frames_path.with_suffix(dataset.DESCRIPTOR_SUFFIX)
    dataset.write_descriptors(out, described)
    logger.info(
        "Descriptors written",
        extra={
            "path": str(out),
            "policy": policy.name,
            "frames": len(frame_file.frames),
            "described": len(described),
            "clamped_fraction": removed,
        },
    )
    print(out)
    return EXIT_OK


def _pair_spec(args: argparse.Namespace) -> PairSpec:
    suffix = args.frames_suffix
    if args.sequence is not None:
        directory = _require(args.sequence, "sequence directory")
        k = args.pair
        image_a = directory / "img1.pgm"
        image_b = directory / f"img{k}.pgm"
        homography = directory / f"H1to{k}p"
        sequence = directory.name
    else:
        if args.image_a is None or args.image_b is None:
            raise DatasetError("eval needs --sequence or both --image-a and --image-b")
        image_a, image_b = args.image_a, args.image_b
        if args.homography is None:
            raise DatasetError("eval needs --homography with --image-a/--image-b")
        homography = args.homography
        sequence = image_b.parent.name or "pair"
        k = args.pair
    frames_a = args.frames_a or image_a.with_name(f"{image_a.stem}{suffix}")
    frames_b = args.frames_b or image_b.with_name(f"{image_b.stem}{suffix}")
    for path, what in (
        (image_a, "image"),
        (image_b, "image"),
        (frames_a, "frames file"),
        (frames_b, "frames file"),
        (homography, "homography"),
    ):
        _require(path, what)
    return PairSpec(
        sequence=sequence,
        pair_index=k,
        image_a=image_a,
        image_b=image_b,
        frames_a=frames_a,
        frames_b=frames_b,
        homography=homography,
    )


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    """AP of one pair under each requested policy; rows go to stdout as CSV."""
    spec = _pair_spec(args)
    pair = dataset.load_pair(spec)
    service = _service(args, settings)
    bench, evaluations = service.run([pair], jobs=1)
    if not evaluations:
        logger.error("Pair could not be evaluated", extra={"pair": spec.label})
        return EXIT_NO_PAIRS
    if args.out is not None:
        report.write_tables(bench, args.out)
        report.write_plots(bench, evaluations, args.out)
    sys.stdout.write(report.pairs_csv(bench))
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, settings: Settings) -> int:
    """Benchmark a dataset root or a synthetic suite and write the report files."""
    service = _service(args, settings)
    skipped: list[str] = []
    if args.synth:
        items = dataset.synthetic_suite(
            args.synth,
            seed=args.seed,
            noise_sd=args.noise_sd,
            magnification=service.config.magnification,
        )
        if args.save_synth is not None:
            for pair in items:
                dataset.write_pair(args.save_synth, pair, args.frames_suffix)
    elif args.root is not None:
        root = _require(args.root, "dataset root")
        items, skipped = dataset.discover_pairs(root, args.frames_suffix)
    else:
        raise DatasetError("bench needs a dataset root or --synth N")

    bench, evaluations = service.run(items, jobs=args.jobs, skipped=skipped)
    for label in bench.skipped:
        logger.warning("Pair not evaluated", extra={"pair": label})
    if not evaluations:
        logger.error("No usable pairs", extra={"skipped": len(bench.skipped)})
        return EXIT_NO_PAIRS

    out = args.out or Path(settings.OUTPUT_DIR)
    report.write_tables(bench, out)
    report.write_plots(bench, evaluations, out)
    sys.stdout.write(report.format_table(bench))
    return EXIT_OK


THRESHOLD_COLUMNS = (
    "mass",
    "bins",
    "grid",
    "tests",
    "epsilon",
    "alpha",
    "approx",
    "exact",
    "saturated",
    "exact_ge_approx",
    "slud_exact",
    "slud_approx",
)


def cmd_thresholds(args: argparse.Namespace, settings: Settings) -> int:
    """Print exact and closed-form thresholds for each (mass, epsilon) combination."""
    grid = build_grid(settings, args.grid)
    epsilons = args.epsilon or [settings.EPSILON]
    print("\t".join(THRESHOLD_COLUMNS))
    for epsilon in epsilons:
        cfg = build_acontrario_config(settings, epsilon)
        for mass in args.mass:
            summary = acontrario.threshold_summary(cfg, grid, mass, args.bins)
            print(
                "\t".join(
                    [
                        f"{summary.mass:g}",
                        str(summary.bins),
                        summary.grid,
                        f"{summary.tests:g}",
                        f"{summary.epsilon:g}",
                        f"{summary.alpha:.4f}",
                        f"{summary.approx:.4f}",
                        str(summary.exact),
                        str(summary.saturated).lower(),
                        str(summary.exact_at_least_approx).lower(),
                        str(summary.slud_exact).lower(),
                        str(summary.slud_approx).lower(),
                    ]
                )
            )
    return EXIT_OK


def cmd_serve(args: argparse.Namespace, settings: Settings) -> int:
    """Run the HTTP API with uvicorn."""
    import uvicorn

    uvicorn.run(
        "siftclamp.main:create_app",
        factory=True,
        host=args.host,
        port=args.port or settings.PORT,
        workers=settings.WORKERS,
        log_config=None,
    )
    return EXIT_OK


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sift-clamp",
        description="SIFT-style descriptors with Lowe and meaningful clamping, and a matching "
        "benchmark",
    )
    parser.add_argument("--log-level", help="override LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    describe = commands.add_parser("describe", help="describe the frames of one image")
    describe.add_argument("image", type=Path, help="PGM image")
    describe.add_argument("frames", type=Path, help="frame file (x y scale orientation)")
    describe.add_argument("--out", type=Path, help="output .desc file (default: next to frames)")
    _pipeline_args(describe, "single")
    describe.set_defaults(func=cmd_describe)

    evaluate = commands.add_parser("eval", help="AP of one image pair per policy")
    evaluate.add_argument("--sequence", type=Path, help="Oxford-layout sequence directory")
    evaluate.add_argument("--pair", type=int, default=2, help="target image index k (1 -> k)")
    evaluate.add_argument("--image-a", type=Path)
    evaluate.add_argument("--image-b", type=Path)
    evaluate.add_argument("--frames-a", type=Path)
    evaluate.add_argument("--frames-b", type=Path)
    evaluate.add_argument("--homography", type=Path, help="3x3 homography from A to B")
    _pipeline_args(evaluate, "multiple")
    _evaluation_args(evaluate, settings)
    evaluate.set_defaults(func=cmd_eval)

    bench = commands.add_parser("bench", help="benchmark a dataset or a synthetic suite")
    bench.add_argument("root", type=Path, nargs="?", help="dataset root (Oxford layout)")
    bench.add_argument("--synth", type=int, help="generate N synthetic pairs instead")
    bench.add_argument("--seed", type=int, default=0, help="synthetic suite seed")
    bench.add_argument(
        "--noise-sd", type=float, default=2.0, help="synthetic noise sd in gray levels"
    )
    bench.add_argument("--save-synth", type=Path, help="also write the synthetic pairs here")
    _pipeline_args(bench, "multiple")
    _evaluation_args(bench, settings)
    bench.set_defaults(func=cmd_bench)

    thresholds = commands.add_parser("thresholds", help="exact vs approximate thresholds")
    thresholds.add_argument(
        "--mass", type=float, nargs="+", required=True, help="total descriptor mass M"
    )
    thresholds.add_argument("--bins", type=int, help="bin count L (default: from the grid)")
    thresholds.add_argument("--grid", help="histogram grid NXxNYxNTHETA (default: GRID)")
    thresholds.add_argument(
        "--epsilon", type=float, action="append", help="detection budget; repeat for several"
    )
    thresholds.set_defaults(func=cmd_thresholds)

    serve = commands.add_parser("serve", help="run the HTTP API")
    serve.add_argument("--host", default="0.0.0.0")
    serve.add_argument("--port", type=int, help="default: PORT")
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    settings = get_settings()
    parser = build_parser(settings)
    args = parser.parse_args(argv)
    setup_logging(args.log_level, stream=sys.stderr)
    token = run_id_ctx_var.set(uuid.uuid4().hex[:12])
    try:
        logger.info("Command started", extra={"command": args.command})
        return args.func(args, settings)
    except (SiftClampError, OSError, ValidationError, ValueError) as e:
        logger.error("Command failed", extra={"command": args.command, "error": str(e)})
        print(f"sift-clamp {args.command}: error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    finally:
        run_id_ctx_var.reset(token)


if __name__ == "__main__":
    sys.exit(main())
