"""Shared domain types and geometric primitives for the live re-id pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class LiveReidError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(LiveReidError):
    """Input data violates a documented constraint."""


class ParseError(ValidationError):
    """A data file line could not be parsed."""

    def __init__(self, path: object, line_no: int, message: str) -> None:
        super().__init__(f"{path}, line {line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class ConfigurationError(LiveReidError):
    """Invalid configuration or incompatible inputs."""


class EvaluationError(LiveReidError):
    """A metric is undefined for the given inputs."""


class GenerationError(LiveReidError):
    """A synthetic world cannot be produced from the given config."""


class Mode(str, Enum):
    """Gallery-generation strategy for one run."""

    BASELINE = "baseline"  # every detection of every frame enters the gallery
    SKIP = "skip"          # only detections of every n-th frame enter the gallery
    TRADE = "trade"        # tracklets capped at n frames, one representative each


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in continuous pixel coordinates, top-left origin."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"box {name} must be finite")
        if self.w <= 0 or self.h <= 0:
            raise ValidationError(f"box sides must be positive, got w={self.w} h={self.h}")

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; symmetric, in [0, 1]."""
    ix = min(a.right, b.right) - max(a.x, b.x)
    iy = min(a.bottom, b.bottom) - max(a.y, b.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class Detection:
    """One confidence-scored box on one frame.

    ``crop_ref`` names the cropped image and keys both the embedding
    table and the external normality-score table.
    """

    video_id: str
    frame: int
    box: BoundingBox
    confidence: float
    crop_ref: str

    def __post_init__(self) -> None:
        if self.frame < 0:
            raise ValidationError(f"negative frame index {self.frame}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class Tracklet:
    """Ordered run of detections attributed to a single tracked target."""

    id: int
    detections: tuple[Detection, ...]

    def __post_init__(self) -> None:
        if not self.detections:
            raise ValidationError("a tracklet needs at least one detection")
        videos = {d.video_id for d in self.detections}
        if len(videos) != 1:
            raise ValidationError(f"tracklet spans several videos: {sorted(videos)}")
        frames = [d.frame for d in self.detections]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValidationError("tracklet frames must be strictly increasing")

    @property
    def video_id(self) -> str:
        return self.detections[0].video_id

    @property
    def first_frame(self) -> int:
        return self.detections[0].frame

    @property
    def last_frame(self) -> int:
        return self.detections[-1].frame

    def __len__(self) -> int:
        return len(self.detections)


@dataclass(frozen=True)
class GalleryImage:
    """The representative crop a tracklet contributes to the search gallery."""

    detection: Detection
    tracklet_id: int
    normality_score: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.normality_score):
            raise ValidationError("normality score must be finite")


@dataclass(frozen=True)
class Chunk:
    """Half-open frame interval [start_frame, end_frame) of one video."""

    video_id: str
    start_frame: int
    end_frame: int

    def __post_init__(self) -> None:
        if self.start_frame < 0 or self.end_frame <= self.start_frame:
            raise ValidationError(
                f"bad chunk bounds [{self.start_frame}, {self.end_frame})"
            )

    def __len__(self) -> int:
        return self.end_frame - self.start_frame


@dataclass(frozen=True, eq=False)
class Query:
    """A person to look for, described by one unit-norm embedding."""

    query_id: str
    identity: str
    embedding: np.ndarray


def unit_vector(values: object) -> np.ndarray:
    """Return ``values`` scaled to unit L2 norm as a float64 array.

    Vectors already within 1e-12 of unit norm are returned unchanged so
    that normalization is a fixed point and serialized tables round-trip
    bit-identically.
    """
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise ValidationError("embedding must be a non-empty 1-d vector")
    if not np.all(np.isfinite(vec)):
        raise ValidationError("embedding components must be finite")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValidationError("zero vector cannot be normalized")
    if abs(norm - 1.0) <= 1e-12:
        return vec
    return vec / norm


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two unit vectors (their dot product)."""
    if a.shape != b.shape:
        raise ConfigurationError(
            f"embedding dimensions differ: {a.shape[0]} vs {b.shape[0]}"
        )
    return float(np.dot(a, b))


def map_to_score(similarity: float) -> float:
    """Affine map from cosine similarity in [-1, 1] to a score in [0, 1]."""
    return min(1.0, max(0.0, (similarity + 1.0) / 2.0))
