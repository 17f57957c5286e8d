"""Bounded-length tracklet assembly from per-frame detections.

Targets are acquired only at detector frames (indices 0, n, 2n, ... of
the processed range) and then followed one frame at a time by a
pluggable tracker. A track closes the moment its target is lost; there
is no coasting over gaps. A track is also cut once it holds ``max_len``
detections, so a tracklet can never absorb an arbitrarily long stretch.
Anyone appearing between detector frames is simply not tracked until
the next detector frame.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

from livereid.core import (
    BoundingBox,
    ConfigurationError,
    Detection,
    LiveReidError,
    Mode,
    Tracklet,
    ValidationError,
    iou,
)
from livereid.ingest import GroundTruth

DEFAULT_IOU_MATCH_THRESHOLD = 0.3


@dataclass(frozen=True)
class TrackletBuildConfig:
    """Knobs of the tracklet builder.

    ``max_len`` is ignored for Baseline mode, which always emits
    single-detection tracklets for every frame.
    """

    max_len: int
    iou_match_threshold: float = DEFAULT_IOU_MATCH_THRESHOLD
    mode: Mode = Mode.TRADE

    def __post_init__(self) -> None:
        if self.max_len < 1:
            raise ConfigurationError(f"max_len must be >= 1, got {self.max_len}")
        if not 0.0 < self.iou_match_threshold <= 1.0:
            raise ConfigurationError(
                f"iou_match_threshold must be in (0, 1], got {self.iou_match_threshold}"
            )


class TrackerContract(ABC):
    """Frame-to-frame association of active tracks with detections.

    ``init`` builds the state for a freshly acquired target from its
    first detection. ``step`` advances every active state against one
    frame's detections and returns, aligned with ``states``, either
    ``(detection_index, next_state)`` or ``None`` when the target is
    lost. A detection index may be claimed by at most one track.
    """

    @abstractmethod
    def init(self, detection: Detection) -> object:
        ...

    @abstractmethod
    def step(
        self, states: Sequence[object], detections: Sequence[Detection]
    ) -> list[tuple[int, object] | None]:
        ...


def greedy_iou_step(
    active_boxes: Sequence[BoundingBox],
    detections: Sequence[Detection],
    iou_match_threshold: float = DEFAULT_IOU_MATCH_THRESHOLD,
) -> list[int | None]:
    """One-to-one greedy matching in descending IoU order.

    Pairs under the threshold stay unmatched; exact ties break by
    track position, then detection position.
    """
    candidates: list[tuple[float, int, int]] = []
    for ti, box in enumerate(active_boxes):
        for di, det in enumerate(detections):
            overlap = iou(box, det.box)
            if overlap >= iou_match_threshold:
                candidates.append((-overlap, ti, di))
    candidates.sort()
    matched: list[int | None] = [None] * len(active_boxes)
    claimed: set[int] = set()
    for _neg_overlap, ti, di in candidates:
        if matched[ti] is None and di not in claimed:
            matched[ti] = di
            claimed.add(di)
    return matched


class GreedyIouTracker(TrackerContract):
    """Default tracker: follow each target by best box overlap with its last box."""

    def __init__(self, iou_match_threshold: float = DEFAULT_IOU_MATCH_THRESHOLD):
        if not 0.0 < iou_match_threshold <= 1.0:
            raise ConfigurationError(
                f"iou_match_threshold must be in (0, 1], got {iou_match_threshold}"
            )
        self.iou_match_threshold = iou_match_threshold

    def init(self, detection: Detection) -> BoundingBox:
        return detection.box

    def step(
        self, states: Sequence[object], detections: Sequence[Detection]
    ) -> list[tuple[int, object] | None]:
        boxes = [s for s in states]
        matched = greedy_iou_step(boxes, detections, self.iou_match_threshold)  # type: ignore[arg-type]
        return [
            (di, detections[di].box) if di is not None else None for di in matched
        ]


TRACKERS = {
    "greedy-iou": GreedyIouTracker,
}


def make_tracker(
    name: str, iou_match_threshold: float = DEFAULT_IOU_MATCH_THRESHOLD
) -> TrackerContract:
    try:
        factory = TRACKERS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown tracker {name!r}, available: {sorted(TRACKERS)}"
        ) from None
    return factory(iou_match_threshold)


class _OpenTrack:
    __slots__ = ("id", "state", "detections")

    def __init__(self, track_id: int, state: object, first: Detection):
        self.id = track_id
        self.state = state
        self.detections = [first]

    def to_tracklet(self) -> Tracklet:
        return Tracklet(id=self.id, detections=tuple(self.detections))


def _check_frames(frames: Sequence[Sequence[Detection]]) -> None:
    # Positions in `frames` must map to consecutive frame indices; this is
    # what makes tracklet frames consecutive by construction.
    base: int | None = None
    for k, dets in enumerate(frames):
        for det in dets:
            if base is None:
                base = det.frame - k
            elif det.frame != base + k:
                raise ValidationError(
                    f"frames are not consecutive: position {k} holds frame {det.frame}, "
                    f"expected {base + k}"
                )


def build_tracklets(
    frames: Sequence[Sequence[Detection]],
    config: TrackletBuildConfig,
    tracker: TrackerContract | None = None,
) -> list[Tracklet]:
    """Partition detections into tracklets according to the configured mode.

    ``frames[k]`` holds the detections of the k-th consecutive frame of
    the processed range (empty frames included). Detections are assumed
    pre-filtered by confidence. The returned list is ordered by track
    creation; no detection appears in two tracklets.
    """
    _check_frames(frames)
    n = config.max_len

    if config.mode is Mode.BASELINE:
        return [
            Tracklet(id=i, detections=(det,))
            for i, det in enumerate(d for dets in frames for d in dets)
        ]

    if config.mode is Mode.SKIP:
        picked = (d for k, dets in enumerate(frames) if k % n == 0 for d in dets)
        return [Tracklet(id=i, detections=(det,)) for i, det in enumerate(picked)]

    if tracker is None:
        tracker = GreedyIouTracker(config.iou_match_threshold)

    done: list[Tracklet] = []
    active: list[_OpenTrack] = []
    next_id = 0

    def advance(dets: Sequence[Detection]) -> set[int]:
        """Step still-open tracks; close lost or full ones. Returns claimed det indices."""
        nonlocal active
        still: list[_OpenTrack] = []
        for track in active:
            if len(track.detections) >= n:
                done.append(track.to_tracklet())
            else:
                still.append(track)
        claimed: set[int] = set()
        if not still:
            active = []
            return claimed
        results = tracker.step([t.state for t in still], dets)
        if len(results) != len(still):
            raise LiveReidError(
                f"tracker returned {len(results)} results for {len(still)} tracks"
            )
        surviving: list[_OpenTrack] = []
        for track, result in zip(still, results):
            if result is None:
                done.append(track.to_tracklet())
                continue
            di, new_state = result
            if di in claimed or not 0 <= di < len(dets):
                raise LiveReidError(
                    f"tracker assigned detection {di} twice or out of range"
                )
            claimed.add(di)
            track.detections.append(dets[di])
            track.state = new_state
            surviving.append(track)
        active = surviving
        return claimed

    for k, raw in enumerate(frames):
        dets = list(raw)
        if k % n == 0:
            # cut full tracks first, then let still-open tracks claim
            # detections, then spawn tracks from the leftovers
            kept: list[_OpenTrack] = []
            for track in active:
                if len(track.detections) >= n:
                    done.append(track.to_tracklet())
                else:
                    kept.append(track)
            active = kept
            claimed = advance(dets)
            for di, det in enumerate(dets):
                if di not in claimed:
                    active.append(_OpenTrack(next_id, tracker.init(det), det))
                    next_id += 1
        else:
            advance(dets)

    done.extend(track.to_tracklet() for track in active)
    done.sort(key=lambda t: t.id)
    return done


@dataclass(frozen=True)
class CoverageReport:
    """How well a tracklet set covers ground truth.

    ``coverage`` maps each ground-truth identity to the fraction of its
    annotated frames carrying some tracklet detection with IoU >= 0.5.
    ``label_switches`` counts tracklets whose detections span more than
    one identity.
    """

    coverage: dict[str, float]
    label_switches: int


def track_coverage_stats(
    tracklets: Sequence[Tracklet], ground_truth: GroundTruth
) -> CoverageReport:
    covered: set[tuple[str, str, int]] = set()
    switches = 0
    for tracklet in tracklets:
        identities: set[str] = set()
        for det in tracklet.detections:
            boxes = ground_truth.boxes_on(det.video_id, det.frame)
            best: tuple[float, str] | None = None
            for identity in sorted(boxes):
                overlap = iou(det.box, boxes[identity])
                if overlap >= 0.5:
                    covered.add((det.video_id, identity, det.frame))
                    if best is None or overlap > best[0]:
                        best = (overlap, identity)
            if best is not None:
                identities.add(best[1])
        if len(identities) > 1:
            switches += 1

    coverage: dict[str, float] = {}
    per_identity: dict[str, list[tuple[str, int]]] = {}
    for rec in ground_truth.records:
        per_identity.setdefault(rec.identity, []).append((rec.video_id, rec.frame))
    for identity, frames in per_identity.items():
        hit = sum((video, identity, frame) in covered for video, frame in frames)
        coverage[identity] = hit / len(frames)
    return CoverageReport(coverage=coverage, label_switches=switches)
