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
"""PGM raster codec (binary P5 and ASCII P2).

Images are returned as float64 arrays of gray levels in [0, 255]; 16-bit
rasters are rescaled by 255 / maxval so descriptor masses stay comparable.
"""

import logging
import re
from pathlib import Path

import numpy as np

from siftclamp.exceptions import ImageFormatError

logger = logging.getLogger(__name__)

_COMMENT = re.compile(rb"#[^\n\r]*")
_WHITESPACE = b" \t\r\n\v\f"


def _header_tokens(data: bytes, path: Path | str) -> tuple[list[bytes], int]:
    """First four header tokens (magic, width, height, maxval) and the offset after them."""
    tokens: list[bytes] = []
    position = 0
    while len(tokens) < 4:
        while position < len(data) and data[position] in _WHITESPACE:
            position += 1
        if position < len(data) and data[position : position + 1] == b"#":
            while position < len(data) and data[position] not in b"\r\n":
                position += 1
            continue
        start = position
        while position < len(data) and data[position] not in _WHITESPACE + b"#":
            position += 1
        if start == position:
            raise ImageFormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:position])
    return tokens, position


def decode_pgm(data: bytes, path: Path | str = "<bytes>") -> np.ndarray:
    """Decode PGM bytes into a float64 gray-level array of shape (height, width)."""
    tokens, position = _header_tokens(data, path)
    magic = tokens[0]
    if magic not in (b"P5", b"P2"):
        raise ImageFormatError(f"{path}: not a grayscale PGM (magic {magic!r})")
    try:
        width, height, maxval = (int(token) for token in tokens[1:])
    except ValueError as e:
        raise ImageFormatError(f"{path}: malformed PGM header: {e}") from e
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ImageFormatError(
            f"{path}: invalid PGM dimensions or maxval ({width}x{height}, maxval {maxval})"
        )

    count = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates the header from the raster
        body = data[position + 1 :]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        if len(body) < count * dtype.itemsize:
            raise ImageFormatError(
                f"{path}: raster truncated ({len(body)} bytes for {width}x{height} pixels)"
            )
        pixels = np.frombuffer(body, dtype=dtype, count=count)
    else:
        text = _COMMENT.sub(b" ", data[position:])
        try:
            pixels = np.array([int(token) for token in text.split()[:count]], dtype=np.int64)
        except ValueError as e:
            raise ImageFormatError(f"{path}: non-numeric ASCII PGM sample: {e}") from e
        if pixels.size < count:
            raise ImageFormatError(f"{path}: expected {count} samples, found {pixels.size}")

    if pixels.max(initial=0) > maxval:
        raise ImageFormatError(f"{path}: sample exceeds maxval {maxval}")
    image = pixels.reshape(height, width).astype(np.float64)
    if maxval != 255:
        image *= 255.0 / maxval
    return image


def read_pgm(path: Path | str) -> np.ndarray:
    """Read a PGM file as float64 gray levels in [0, 255].

    Raises:
        ImageFormatError: If the file is not a well-formed P5/P2 raster
        OSError: If the file cannot be read
    """
    data = Path(path).read_bytes()
    image = decode_pgm(data, path)
    logger.debug("Image loaded", extra={"path": str(path), "shape": list(image.shape)})
    return image


def encode_pgm(image: np.ndarray) -> bytes:
    """Binary 8-bit PGM bytes of an image, rounded and clipped to [0, 255]."""
    array = np.asarray(image, dtype=np.float64)
    if array.ndim != 2 or array.size == 0:
        raise ImageFormatError(f"PGM images must be non-empty 2-D arrays, got shape {array.shape}")
    pixels = np.clip(np.rint(array), 0, 255).astype(np.uint8)
    height, width = pixels.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def write_pgm(path: Path | str, image: np.ndarray) -> Path:
    """Write an image as a binary 8-bit PGM and return the path written."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(encode_pgm(image))
    return target
