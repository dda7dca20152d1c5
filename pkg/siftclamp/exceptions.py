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
"""Exception hierarchy shared by the library, the CLI and the HTTP API.

Every error raised on purpose derives from SiftClampError. The concrete classes
also derive from ValueError because each one reports an argument or input that
violates a documented precondition.
"""


class SiftClampError(Exception):
    """Base class for all sift-clamp errors."""

    pass


class DomainError(SiftClampError, ValueError):
    """Raised when a statistics routine receives arguments outside its domain."""

    pass


class DescriptorError(SiftClampError, ValueError):
    """Raised when a patch cannot be described on the requested grid."""

    pass


class MatchingError(SiftClampError, ValueError):
    """Raised when descriptor sets cannot be compared."""

    pass


class EvaluationError(SiftClampError, ValueError):
    """Raised when an evaluation summary cannot be computed."""

    pass


class DatasetError(SiftClampError, ValueError):
    """Raised when dataset files are missing or malformed."""

    pass


class HomographyParseError(DatasetError):
    """Raised when a homography file is malformed, non-finite or singular."""

    pass


class FrameFileError(DatasetError):
    """Raised when a frame or descriptor file has ragged or malformed rows."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number


class ImageFormatError(DatasetError):
    """Raised when a raster is not a readable PGM file."""

    pass


class PatchOutOfBoundsError(DatasetError):
    """Signals that a frame's measurement region leaves the image; the frame is skipped."""

    def __init__(self, message: str, x: float, y: float, radius: float):
        super().__init__(message)
        self.x = x
        self.y = y
        self.radius = radius
