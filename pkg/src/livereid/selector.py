"""Normality scoring of tracklet crops and representative selection.

Scores only order crops within one tracklet; they are never compared
across tracklets.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Mapping, Sequence

from livereid.core import (
    ConfigurationError,
    Detection,
    GalleryImage,
    Tracklet,
    ValidationError,
)


class ScorerContract(ABC):
    """Deterministic normality score for a cropped detection; higher is better."""

    @abstractmethod
    def score(self, detection: Detection) -> float:
        ...


@dataclass(frozen=True)
class HeuristicScorerConfig:
    target_aspect: float = 2.5     # preferred height / width of a person box
    aspect_weight: float = 1.0
    margin_weight: float = 0.5     # penalty factor per touched frame edge
    frame_width: float = 1280.0
    frame_height: float = 720.0

    def __post_init__(self) -> None:
        if self.target_aspect <= 0:
            raise ConfigurationError("target_aspect must be positive")
        if self.aspect_weight < 0 or self.margin_weight < 0:
            raise ConfigurationError("weights must be non-negative")
        if self.frame_width <= 0 or self.frame_height <= 0:
            raise ConfigurationError("frame dimensions must be positive")


class HeuristicScorer(ScorerContract):
    """Prefers confident, person-shaped boxes that stay clear of frame edges."""

    def __init__(self, config: HeuristicScorerConfig | None = None):
        self.config = config or HeuristicScorerConfig()

    def score(self, detection: Detection) -> float:
        cfg = self.config
        box = detection.box
        log_dev = math.log(box.h / box.w) - math.log(cfg.target_aspect)
        shape = math.exp(-cfg.aspect_weight * log_dev * log_dev)
        touched = (
            (box.x <= 0.0)
            + (box.y <= 0.0)
            + (box.right >= cfg.frame_width)
            + (box.bottom >= cfg.frame_height)
        )
        per_edge = max(0.0, 1.0 - cfg.margin_weight)
        margin = per_edge ** touched
        return detection.confidence * shape * margin


class TableScorer(ScorerContract):
    """Looks scores up from an externally supplied table, keyed by crop_ref."""

    def __init__(self, scores: Mapping[str, float]):
        self.scores = scores

    def score(self, detection: Detection) -> float:
        try:
            return self.scores[detection.crop_ref]
        except KeyError:
            raise ValidationError(
                f"no normality score for crop_ref {detection.crop_ref!r}"
            ) from None


class ConstantScorer(ScorerContract):
    """Scores every crop the same; selection then falls back to the earliest frame."""

    def __init__(self, value: float = 0.5):
        self.value = value

    def score(self, detection: Detection) -> float:
        return self.value


SCORER_NAMES = ("heuristic", "table", "constant")


def make_scorer(
    name: str,
    *,
    score_table: Mapping[str, float] | None = None,
    heuristic: HeuristicScorerConfig | None = None,
    constant: float = 0.5,
) -> ScorerContract:
    if name == "heuristic":
        return HeuristicScorer(heuristic)
    if name == "table":
        if score_table is None:
            raise ConfigurationError("the table scorer needs a score table")
        return TableScorer(score_table)
    if name == "constant":
        return ConstantScorer(constant)
    raise ConfigurationError(f"unknown scorer {name!r}, available: {list(SCORER_NAMES)}")


def select_representative(tracklet: Tracklet, scorer: ScorerContract) -> GalleryImage:
    """Pick the best-scored crop; ties go to the earliest frame, then file order."""
    scores = [scorer.score(det) for det in tracklet.detections]
    best = min(
        range(len(scores)),
        key=lambda i: (-scores[i], tracklet.detections[i].frame, i),
    )
    return GalleryImage(
        detection=tracklet.detections[best],
        tracklet_id=tracklet.id,
        normality_score=scores[best],
    )


def build_gallery(
    tracklets: Sequence[Tracklet], scorer: ScorerContract
) -> list[GalleryImage]:
    """One representative per tracklet, ordered by (video, first frame, tracklet id)."""
    ordered = sorted(tracklets, key=lambda t: (t.video_id, t.first_frame, t.id))
    return [select_representative(t, scorer) for t in ordered]
