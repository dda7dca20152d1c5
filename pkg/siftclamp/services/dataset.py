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
"""Dataset ingestion: homographies, frame files, patch sampling and synthetic pairs.

File formats:
- Homography (H1to{k}p): 9 whitespace-separated numbers, row-major
- Frames (.frames / .desc): one feature per line, "x y scale orientation" followed
  by L descriptor values when descriptors are present; '#' starts a comment line

Oxford layout: a root directory of sequence directories, each holding img1..img6
(PGM), H1to2p..H1to6p, and one frame file per image named img{k}{frames_suffix}.
A root that itself holds img1 is read as a single sequence.
"""

import logging
import math
from collections.abc import Iterable
from pathlib import Path

import numpy as np
from pydantic import ValidationError
from scipy.ndimage import gaussian_filter, map_coordinates

from siftclamp.exceptions import (
    DatasetError,
    FrameFileError,
    HomographyParseError,
    PatchOutOfBoundsError,
)
from siftclamp.models.dataset import FrameFile, PairInput, PairSpec
from siftclamp.models.descriptor import HistogramGrid, Patch
from siftclamp.models.evaluation import DescriptorSet, FeatureFrame, Homography, Sequence
from siftclamp.services import imageio
from siftclamp.services.descriptor import pixel_coordinates
from siftclamp.services.evaluation import local_affine, map_points

logger = logging.getLogger(__name__)

SEQUENCE_LENGTH = 6
DEFAULT_FRAMES_SUFFIX = ".frames"
DESCRIPTOR_SUFFIX = ".desc"
UNIT_RENORMALIZE_TOLERANCE = 1e-12
SYNTH_SEQUENCE = "synth"


def load_homography(text: str) -> Homography:
    """Parse a 3x3 homography and normalize it so H[2, 2] = 1 when nonzero.

    Raises:
        HomographyParseError: If there are not exactly 9 finite numbers or the matrix is singular
    """
    tokens = text.split()
    if len(tokens) != 9:
        raise HomographyParseError(f"homography needs 9 numbers, found {len(tokens)}")
    try:
        values = np.array([float(token) for token in tokens])
    except ValueError as e:
        raise HomographyParseError(f"homography entry is not a number: {e}") from e
    if not np.all(np.isfinite(values)):
        raise HomographyParseError("homography entries must be finite")
    try:
        return Homography(matrix=values.reshape(3, 3))
    except ValidationError as e:
        raise HomographyParseError(f"invalid homography: {e.errors()[0]['msg']}") from e


def read_homography(path: Path | str) -> Homography:
    try:
        return load_homography(Path(path).read_text())
    except HomographyParseError as e:
        raise HomographyParseError(f"{path}: {e}") from e


def load_frames(text: str, expected_descriptor_len: int | None = None) -> FrameFile:
    """Parse a frame file; descriptors, when present, are renormalized to unit length.

    Args:
        text: File content
        expected_descriptor_len: Required descriptor length L, if any

    Raises:
        FrameFileError: On ragged rows, non-numeric values, invalid frames or an
            unexpected descriptor length (line numbers are 1-based)
    """
    frames: list[FeatureFrame] = []
    rows: list[np.ndarray] = []
    columns: int | None = None

    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            values = np.array([float(token) for token in stripped.split()])
        except ValueError as e:
            raise FrameFileError(f"line {line_number}: {e}", line_number) from e

        if columns is None:
            columns = values.size
            if columns < 4:
                raise FrameFileError(
                    f"line {line_number}: a frame needs 4 columns, found {columns}", line_number
                )
            descriptor_len = columns - 4
            if descriptor_len and expected_descriptor_len not in (None, descriptor_len):
                raise FrameFileError(
                    f"line {line_number}: descriptor length {descriptor_len} does not match "
                    f"expected {expected_descriptor_len}",
                    line_number,
                )
        elif values.size != columns:
            raise FrameFileError(
                f"line {line_number}: expected {columns} columns, found {values.size}",
                line_number,
            )

        try:
            frame = FeatureFrame(x=values[0], y=values[1], scale=values[2], orientation=values[3])
        except ValidationError as e:
            raise FrameFileError(
                f"line {line_number}: invalid frame: {e.errors()[0]['msg']}", line_number
            ) from e
        frames.append(frame)
        rows.append(values[4:])

    if columns is None or columns == 4:
        return FrameFile(frames=frames)

    descriptors = np.vstack(rows)
    norms = np.linalg.norm(descriptors, axis=1)
    rescale = (norms > 0) & (np.abs(norms - 1.0) > UNIT_RENORMALIZE_TOLERANCE)
    descriptors[rescale] /= norms[rescale, None]
    return FrameFile(frames=frames, descriptors=descriptors)


def read_frames(path: Path | str, expected_descriptor_len: int | None = None) -> FrameFile:
    """Load a frame file from disk; errors name the path."""
    try:
        return load_frames(Path(path).read_text(), expected_descriptor_len)
    except FrameFileError as e:
        raise FrameFileError(f"{path}: {e}", e.line_number) from e


def format_descriptors(descriptor_set: DescriptorSet) -> str:
    """Text rows "x y scale orientation d_1 .. d_L" at 17 significant digits."""
    lines = []
    for frame, descriptor in zip(descriptor_set.frames, descriptor_set.descriptors, strict=True):
        values = (frame.x, frame.y, frame.scale, frame.orientation, *descriptor)
        lines.append(" ".join(f"{float(value):.17g}" for value in values))
    return "".join(f"{line}\n" for line in lines)


def write_descriptors(path: Path | str, descriptor_set: DescriptorSet) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(format_descriptors(descriptor_set))
    return target


def write_frames(path: Path | str, frames: Iterable[FeatureFrame]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(
        "".join(
            f"{frame.x:.17g} {frame.y:.17g} {frame.scale:.17g} {frame.orientation:.17g}\n"
            for frame in frames
        )
    )
    return target


def measurement_radius(frame: FeatureFrame, magnification: float) -> float:
    """Radius in image pixels of the region a patch is sampled from."""
    return magnification * frame.scale


def fits_in_image(frame: FeatureFrame, shape: tuple[int, ...], magnification: float) -> bool:
    """Whether the measurement disc of the frame lies inside the image."""
    radius = measurement_radius(frame, magnification)
    height, width = shape[:2]
    return (
        frame.x - radius >= 0
        and frame.y - radius >= 0
        and frame.x + radius <= width - 1
        and frame.y + radius <= height - 1
    )


def extract_patch(
    image: np.ndarray, frame: FeatureFrame, grid: HistogramGrid, magnification: float
) -> Patch:
    """Sample the normalized patch of a frame by bilinear interpolation.

    Patch pixel (i, j) has offsets (u, v) = (j - (side - 1)/2, i - (side - 1)/2) and is read at
    center + step * R(orientation) (u, v) with step = magnification * scale / lambda_patch,
    so the patch spans magnification * scale image pixels on each side of the center
    and its x axis follows the frame orientation. Samples outside the image replicate
    the nearest edge pixel. The frame center sits between the four middle pixels, so a
    half turn rotates the patch in place; at orientation 0, step 1 and a center on a pixel
    corner (x + 0.5 integer) the patch is an exact crop.

    Raises:
        PatchOutOfBoundsError: If the measurement disc leaves the image
    """
    if magnification <= 0:
        raise DatasetError(f"magnification must be positive, got {magnification}")
    radius = measurement_radius(frame, magnification)
    if not fits_in_image(frame, image.shape, magnification):
        raise PatchOutOfBoundsError(
            f"frame at ({frame.x:.2f}, {frame.y:.2f}) with radius {radius:.2f} "
            f"leaves the {image.shape[1]}x{image.shape[0]} image",
            frame.x,
            frame.y,
            radius,
        )

    side = grid.patch_side
    step = radius / grid.lambda_patch
    offsets = pixel_coordinates(side)
    v, u = np.meshgrid(offsets, offsets, indexing="ij")
    cos_t, sin_t = math.cos(frame.orientation), math.sin(frame.orientation)
    columns = frame.x + step * (cos_t * u - sin_t * v)
    rows = frame.y + step * (sin_t * u + cos_t * v)
    samples = map_coordinates(
        np.asarray(image, dtype=np.float64), [rows, columns], order=1, mode="nearest"
    )
    return Patch(intensities=samples)


def warp_image(
    image: np.ndarray, h: Homography, shape: tuple[int, int] | None = None
) -> np.ndarray:
    """Image B with B(q) = A(h^-1 q), bilinear sampling, edges replicated."""
    height, width = shape or image.shape[:2]
    rows, columns = np.mgrid[0:height, 0:width].astype(np.float64)
    targets = np.column_stack([columns.ravel(), rows.ravel()])
    sources = map_points(h.inverse(), targets)
    warped = map_coordinates(
        np.asarray(image, dtype=np.float64),
        [sources[:, 1], sources[:, 0]],
        order=1,
        mode="nearest",
    )
    return warped.reshape(height, width)


def synth_pair(
    texture: np.ndarray,
    h: Homography,
    noise_sd: float = 2.0,
    rng: np.random.Generator | None = None,
    name: str = SYNTH_SEQUENCE,
) -> Sequence:
    """Two-image sequence: the texture and its warp by h plus Gaussian noise (gray levels).

    Raises:
        DatasetError: If noise_sd is negative
    """
    if noise_sd < 0:
        raise DatasetError(f"noise_sd must be nonnegative, got {noise_sd}")
    reference = np.asarray(texture, dtype=np.float64)
    warped = warp_image(reference, h)
    if noise_sd > 0:
        rng = rng or np.random.default_rng(0)
        warped = np.clip(warped + rng.normal(0.0, noise_sd, warped.shape), 0.0, 255.0)
    return Sequence(name=name, images=[reference, warped], homographies=[h])


def synth_texture(
    shape: tuple[int, int], rng: np.random.Generator, smoothing: float = 2.0
) -> np.ndarray:
    """Smoothed white noise stretched to the [0, 255] gray range."""
    noise = gaussian_filter(rng.uniform(0.0, 1.0, shape), sigma=smoothing, mode="reflect")
    low, high = float(noise.min()), float(noise.max())
    if high == low:
        return np.full(shape, 127.5)
    return 255.0 * (noise - low) / (high - low)


def random_homography(
    rng: np.random.Generator,
    shape: tuple[int, int],
    max_rotation_deg: float = 20.0,
    max_scale: float = 1.3,
    max_perspective: float = 5e-5,
) -> Homography:
    """Rotation, zoom and a small perspective term about the image center."""
    height, width = shape
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    angle = math.radians(rng.uniform(-max_rotation_deg, max_rotation_deg))
    zoom = rng.uniform(1.0, max_scale)
    px, py = rng.uniform(-max_perspective, max_perspective, size=2)

    to_origin = np.array([[1.0, 0.0, -cx], [0.0, 1.0, -cy], [0.0, 0.0, 1.0]])
    back = np.array([[1.0, 0.0, cx], [0.0, 1.0, cy], [0.0, 0.0, 1.0]])
    similarity = np.array(
        [
            [zoom * math.cos(angle), -zoom * math.sin(angle), 0.0],
            [zoom * math.sin(angle), zoom * math.cos(angle), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    perspective = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [px, py, 1.0]])
    return Homography(matrix=back @ perspective @ similarity @ to_origin)


def grid_frames(
    shape: tuple[int, int],
    rng: np.random.Generator,
    spacing: float = 16.0,
    scale: float = 4.0,
    margin: float = 20.0,
) -> list[FeatureFrame]:
    """Frames on a jittered square lattice with random orientations."""
    height, width = shape
    frames = []
    for y in np.arange(margin, height - margin + 1e-9, spacing):
        for x in np.arange(margin, width - margin + 1e-9, spacing):
            jitter_x, jitter_y = rng.uniform(-spacing / 4.0, spacing / 4.0, size=2)
            frames.append(
                FeatureFrame(
                    x=float(x + jitter_x),
                    y=float(y + jitter_y),
                    scale=float(scale * rng.uniform(0.85, 1.15)),
                    orientation=float(rng.uniform(0.0, 2.0 * math.pi)),
                )
            )
    return frames


def map_frame(h: Homography, frame: FeatureFrame) -> FeatureFrame | None:
    """Image of a frame under h, using the similarity closest to the local affine map."""
    affine = local_affine(h, frame.x, frame.y)
    if affine is None:
        return None
    center, jacobian = affine
    rotation = math.atan2(jacobian[1, 0] - jacobian[0, 1], jacobian[0, 0] + jacobian[1, 1])
    return FeatureFrame(
        x=float(center[0]),
        y=float(center[1]),
        scale=frame.scale * math.sqrt(abs(float(np.linalg.det(jacobian)))),
        orientation=float(np.mod(frame.orientation + rotation, 2.0 * math.pi)),
    )


def jitter_frame(
    frame: FeatureFrame,
    rng: np.random.Generator,
    position_sd: float = 1.5,
    scale_sd: float = 0.05,
    orientation_sd_deg: float = 8.0,
) -> FeatureFrame:
    """Frame perturbed the way a detector re-localizes a point in the second image.

    Position and orientation get Gaussian noise; scale gets a log-normal factor.
    """
    dx, dy = rng.normal(0.0, position_sd, size=2)
    turn = rng.normal(0.0, math.radians(orientation_sd_deg))
    return FeatureFrame(
        x=frame.x + float(dx),
        y=frame.y + float(dy),
        scale=frame.scale * math.exp(float(rng.normal(0.0, scale_sd))),
        orientation=float(np.mod(frame.orientation + turn, 2.0 * math.pi)),
    )


def distractor_frames(
    shape: tuple[int, int],
    rng: np.random.Generator,
    count: int,
    magnification: float,
    scale: float = 4.0,
) -> list[FeatureFrame]:
    """Uniformly placed frames with random scale and orientation that fit in the image."""
    height, width = shape
    frames: list[FeatureFrame] = []
    for _ in range(count):
        frame_scale = float(scale * rng.uniform(0.85, 1.15))
        margin = magnification * frame_scale + 1.0
        if 2 * margin >= min(height, width) - 1:
            break
        frames.append(
            FeatureFrame(
                x=float(rng.uniform(margin, width - 1 - margin)),
                y=float(rng.uniform(margin, height - 1 - margin)),
                scale=frame_scale,
                orientation=float(rng.uniform(0.0, 2.0 * math.pi)),
            )
        )
    return frames


def synthetic_suite(
    count: int,
    seed: int = 0,
    shape: tuple[int, int] = (192, 192),
    noise_sd: float = 2.0,
    magnification: float = 3.0,
    position_sd: float = 1.5,
    scale_sd: float = 0.05,
    orientation_sd_deg: float = 8.0,
    dropout: float = 0.15,
    distractor_fraction: float = 0.5,
) -> list[PairInput]:
    """Seeded synthetic benchmark: textures warped by random homographies.

    Frames of image A sit on a jittered grid. Image B frames are their images under h
    with detector-like jitter, dropped where the measurement region would leave image B
    and, with probability dropout, at random (A frames left without a counterpart).
    B also receives distractor_fraction * len(B) unrelated frames at random places,
    and the B list is shuffled.
    """
    if count < 1:
        raise DatasetError(f"a synthetic suite needs at least one pair, got {count}")
    if not 0.0 <= dropout < 1.0:
        raise DatasetError(f"dropout must lie in [0, 1), got {dropout}")
    if distractor_fraction < 0:
        raise DatasetError(f"distractor_fraction must be nonnegative, got {distractor_fraction}")
    rng = np.random.default_rng(seed)
    pairs = []
    for index in range(count):
        texture = synth_texture(shape, rng)
        h = random_homography(rng, shape)
        sequence = synth_pair(texture, h, noise_sd=noise_sd, rng=rng)
        frames_a = [
            frame
            for frame in grid_frames(shape, rng)
            if fits_in_image(frame, shape, magnification)
        ]
        frames_b = []
        for frame in frames_a:
            mapped = map_frame(h, frame)
            if mapped is None or rng.uniform() < dropout:
                continue
            mapped = jitter_frame(mapped, rng, position_sd, scale_sd, orientation_sd_deg)
            if fits_in_image(mapped, shape, magnification):
                frames_b.append(mapped)
        frames_b += distractor_frames(
            shape, rng, int(round(distractor_fraction * len(frames_b))), magnification
        )
        frames_b = [frames_b[i] for i in rng.permutation(len(frames_b))]
        pairs.append(
            PairInput(
                sequence=SYNTH_SEQUENCE,
                pair_index=index + 2,
                image_a=sequence.images[0],
                image_b=sequence.images[1],
                frames_a=frames_a,
                frames_b=frames_b,
                homography=h,
            )
        )
    logger.info(
        "Synthetic suite generated",
        extra={
            "pairs": count,
            "seed": seed,
            "shape": list(shape),
            "noise_sd": noise_sd,
            "dropout": dropout,
            "distractor_fraction": distractor_fraction,
        },
    )
    return pairs


def write_pair(
    directory: Path | str, pair: PairInput, frames_suffix: str = DEFAULT_FRAMES_SUFFIX
) -> Path:
    """Write a pair in the Oxford layout (img1, img{k}, H1to{k}p and frame files)."""
    root = Path(directory) / pair.sequence
    root.mkdir(parents=True, exist_ok=True)
    k = pair.pair_index
    imageio.write_pgm(root / "img1.pgm", pair.image_a)
    imageio.write_pgm(root / f"img{k}.pgm", pair.image_b)
    write_frames(root / f"img1{frames_suffix}", pair.frames_a)
    write_frames(root / f"img{k}{frames_suffix}", pair.frames_b)
    (root / f"H1to{k}p").write_text(
        "\n".join(" ".join(f"{value:.17g}" for value in row) for row in pair.homography.matrix)
        + "\n"
    )
    return root


def _image_path(directory: Path, index: int) -> Path:
    return directory / f"img{index}.pgm"


def sequence_directories(root: Path | str) -> list[Path]:
    """Sequence directories under a dataset root, sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    if _image_path(root, 1).exists():
        return [root]
    return sorted(path for path in root.iterdir() if path.is_dir())


def discover_pairs(
    root: Path | str, frames_suffix: str = DEFAULT_FRAMES_SUFFIX
) -> tuple[list[PairSpec], list[str]]:
    """Every complete pair 1 -> k under the root, plus labels of incomplete ones.

    A pair is skipped, and reported, when its target image, its homography or
    either frame file is missing; a missing reference image skips the sequence.
    """
    pairs: list[PairSpec] = []
    skipped: list[str] = []
    for directory in sequence_directories(root):
        name = directory.name
        reference = _image_path(directory, 1)
        reference_frames = directory / f"img1{frames_suffix}"
        if not reference.exists() or not reference_frames.exists():
            missing = reference if not reference.exists() else reference_frames
            skipped.append(f"{name}: missing {missing.name}")
            continue
        for k in range(2, SEQUENCE_LENGTH + 1):
            spec = PairSpec(
                sequence=name,
                pair_index=k,
                image_a=reference,
                image_b=_image_path(directory, k),
                frames_a=reference_frames,
                frames_b=directory / f"img{k}{frames_suffix}",
                homography=directory / f"H1to{k}p",
            )
            required = (spec.image_b, spec.frames_b, spec.homography)
            absent = [path.name for path in required if not path.exists()]
            if absent:
                skipped.append(f"{spec.label}: missing {', '.join(absent)}")
                continue
            pairs.append(spec)

    logger.info(
        "Dataset scanned",
        extra={"root": str(root), "pairs": len(pairs), "skipped": len(skipped)},
    )
    return pairs, skipped


def load_pair(spec: PairSpec) -> PairInput:
    """Read both images, both frame files and the homography of a pair."""
    return PairInput(
        sequence=spec.sequence,
        pair_index=spec.pair_index,
        image_a=imageio.read_pgm(spec.image_a),
        image_b=imageio.read_pgm(spec.image_b),
        frames_a=read_frames(spec.frames_a).frames,
        frames_b=read_frames(spec.frames_b).frames,
        homography=read_homography(spec.homography),
    )


def load_oxford_sequence(directory: Path | str) -> Sequence:
    """Read img1..img6 and H1to2p..H1to6p of one sequence directory."""
    directory = Path(directory)
    images = []
    homographies = []
    for k in range(1, SEQUENCE_LENGTH + 1):
        path = _image_path(directory, k)
        if not path.exists():
            raise DatasetError(f"sequence {directory.name} is missing {path.name}")
        images.append(imageio.read_pgm(path))
        if k > 1:
            homographies.append(read_homography(directory / f"H1to{k}p"))
    return Sequence(name=directory.name, images=images, homographies=homographies)
