"""Live person re-identification: tracklet galleries and open-set alert evaluation."""

from livereid.core import (
    BoundingBox,
    Chunk,
    ConfigurationError,
    Detection,
    EvaluationError,
    GalleryImage,
    GenerationError,
    LiveReidError,
    Mode,
    ParseError,
    Query,
    Tracklet,
    ValidationError,
    cosine_similarity,
    iou,
    map_to_score,
    unit_vector,
)

__all__ = [
    "BoundingBox",
    "Chunk",
    "ConfigurationError",
    "Detection",
    "EvaluationError",
    "GalleryImage",
    "GenerationError",
    "LiveReidError",
    "Mode",
    "ParseError",
    "Query",
    "Tracklet",
    "ValidationError",
    "cosine_similarity",
    "iou",
    "map_to_score",
    "unit_vector",
]
