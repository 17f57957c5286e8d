"""Seeded synthetic worlds and the naive oracles used to check the pipeline.

The world scripts pedestrians walking lanes of a fixed-size frame:
piecewise-linear walks with entry and exit, per-frame detections with
jitter and misses, occasional badly cropped detections whose embeddings
are pulled toward a random direction, and an external normality-score
table that flags bad crops with configurable fidelity. Identities that
share a lane walk in opposing directions, so they cross and put
pressure on the tracker to switch labels.

Everything is driven by one numpy generator, so a config plus seed pins
every byte of the output. The oracles at the bottom re-derive tracklets
and metrics with deliberately naive loops and no shared logic; they are
for tests and refuse large instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from livereid.core import (
    BoundingBox,
    Detection,
    EvaluationError,
    GenerationError,
    Mode,
    Query,
    Tracklet,
    ValidationError,
    unit_vector,
)
from livereid.ingest import Dataset, EmbeddingTable, GroundTruth, GroundTruthRecord
from livereid.reid import AlertOutcome
from livereid.tracker import TrackletBuildConfig


@dataclass(frozen=True)
class WorldConfig:
    """Everything that shapes a synthetic world."""

    n_identities: int = 8
    frames_per_video: int = 6000
    n_videos_per_camera: int = 1
    n_cameras: int = 2
    frame_width: float = 1280.0
    frame_height: float = 720.0
    entry_rate: float = 0.004        # per-frame probability of entering when absent
    exit_rate: float = 0.004         # per-frame probability of leaving when present
    passer_fraction: float = 0.5     # share of identities that only pass through briefly
    passer_entry_rate: float = 0.0012
    passer_exit_rate: float = 0.045
    walk_speed: tuple[float, float] = (2.0, 5.0)
    box_height_range: tuple[float, float] = (60.0, 88.0)
    miss_probability: float = 0.01
    box_jitter_sigma: float = 2.0
    bad_crop_probability: float = 0.3
    bad_crop_weight: float = 0.05    # share of a random direction in a bad crop's embedding
    crossing_rate: float = 0.25      # fraction of identities paired into shared lanes
    embedding_dim: int = 32
    separation_margin: float = 0.8   # anchors keep pairwise cosine <= 1 - margin
    clean_noise: float = 0.31
    query_noise: float = 0.09
    scorer_fidelity: float = 0.9     # probability a bad crop is scored below the clean band
    clean_confidence: tuple[float, float] = (0.55, 0.99)
    bad_confidence: tuple[float, float] = (0.42, 0.9)
    n_queries: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_identities < 1 or self.n_queries < 1:
            raise GenerationError("need at least one identity and one query")
        if self.frames_per_video < 1:
            raise GenerationError("need at least one frame per video")
        if self.n_videos_per_camera < 1 or self.n_cameras < 1:
            raise GenerationError("need at least one video and one camera")
        if self.embedding_dim < 2:
            raise GenerationError("embedding_dim must be >= 2")
        for name in (
            "entry_rate", "exit_rate", "passer_fraction",
            "passer_entry_rate", "passer_exit_rate", "miss_probability",
            "bad_crop_probability", "bad_crop_weight", "crossing_rate",
            "scorer_fidelity",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise GenerationError(f"{name} must be in [0, 1], got {value}")
        if not 0.0 < self.separation_margin < 1.0:
            raise GenerationError("separation_margin must be in (0, 1)")


def _identity_anchors(
    rng: np.random.Generator, count: int, dim: int, margin: float
) -> np.ndarray:
    """Random unit anchors with pairwise cosine at most 1 - margin."""
    max_cos = 1.0 - margin
    anchors: list[np.ndarray] = []
    for _ in range(count):
        for _attempt in range(2000):
            raw = rng.normal(size=dim)
            norm = float(np.linalg.norm(raw))
            if norm < 1e-9:
                continue
            vec = raw / norm
            if all(float(np.dot(vec, a)) <= max_cos for a in anchors):
                anchors.append(vec)
                break
        else:
            raise GenerationError(
                f"cannot place {count} anchors with margin {margin} in dim {dim}"
            )
    return np.stack(anchors)


class _Walker:
    """Scripted motion of one identity inside one video."""

    __slots__ = ("present", "x", "direction", "target_x", "paired")

    def __init__(self, paired: bool):
        self.present = False
        self.x = 0.0
        self.direction = 1.0
        self.target_x = 0.0
        self.paired = paired


def generate(config: WorldConfig) -> Dataset:
    """Produce a full dataset for the configured world, pinned by its seed."""
    rng = np.random.default_rng(config.seed)
    n = config.n_identities
    anchors = _identity_anchors(
        rng, n, config.embedding_dim, config.separation_margin
    )

    # fixed per-identity appearance
    heights = rng.uniform(*config.box_height_range, size=n)
    aspects = np.clip(rng.normal(2.5, 0.1, size=n), 2.0, 3.0)
    widths = heights / aspects
    speeds = rng.uniform(*config.walk_speed, size=n)

    # lane layout: paired identities share a lane and will cross, the
    # rest get private lanes that never overlap
    n_paired = int(config.crossing_rate * n)
    n_paired -= n_paired % 2
    lane_of = [0] * n
    lane = 0
    for i in range(0, n_paired, 2):
        lane_of[i] = lane
        lane_of[i + 1] = lane
        lane += 1
    for i in range(n_paired, n):
        lane_of[i] = lane
        lane += 1
    n_lanes = lane
    max_h = float(np.max(heights))
    if n_lanes * max_h > config.frame_height:
        raise GenerationError(
            f"{n_lanes} lanes of {max_h:.0f}px people do not fit a "
            f"{config.frame_height:.0f}px frame"
        )
    lane_y = [(k + 0.5) * config.frame_height / n_lanes for k in range(n_lanes)]

    # dwell profile: the tail of the identity list only passes through,
    # the rest loiter; paired (crossing) identities sit at the front, so
    # they keep the long-dwell profile that makes crossings frequent
    n_passers = int(config.passer_fraction * n)
    entry_rates = np.full(n, config.entry_rate)
    exit_rates = np.full(n, config.exit_rate)
    if n_passers:
        entry_rates[n - n_passers:] = config.passer_entry_rate
        exit_rates[n - n_passers:] = config.passer_exit_rate
    stationary = np.zeros(n)
    for i in range(n):
        rate_sum = entry_rates[i] + exit_rates[i]
        stationary[i] = entry_rates[i] / rate_sum if rate_sum > 0 else 0.0
    identity_labels = [f"p{i:02d}" for i in range(n)]
    sqrt_d = math.sqrt(config.embedding_dim)

    detections: dict[str, list[Detection]] = {}
    gt_records: list[GroundTruthRecord] = []
    embeddings: dict[str, np.ndarray] = {}
    scores: dict[str, float] = {}
    identities_seen: set[int] = set()

    for cam in range(config.n_cameras):
        for vid in range(config.n_videos_per_camera):
            video = f"c{cam}v{vid}"
            dets: list[Detection] = []
            walkers = [_Walker(paired=i < n_paired) for i in range(n)]
            for i, walker in enumerate(walkers):
                walker.present = bool(rng.random() < stationary[i])
                if walker.present:
                    _respawn(rng, walker, config.frame_width, widths[i])
            for frame in range(config.frames_per_video):
                for i, walker in enumerate(walkers):
                    if walker.present:
                        if rng.random() < exit_rates[i]:
                            walker.present = False
                            continue
                        _advance(rng, walker, speeds[i], config.frame_width, widths[i])
                    else:
                        if rng.random() < entry_rates[i]:
                            walker.present = True
                            _respawn(rng, walker, config.frame_width, widths[i])
                        else:
                            continue
                    h = float(heights[i])
                    w = float(widths[i])
                    box = BoundingBox(walker.x, lane_y[lane_of[i]] - h / 2.0, w, h)
                    gt_records.append(
                        GroundTruthRecord(video, frame, identity_labels[i], box)
                    )
                    identities_seen.add(i)
                    det = _detect(rng, config, video, frame, i, box, anchors[i],
                                  sqrt_d, embeddings, scores)
                    if det is not None:
                        dets.append(det)
            detections[video] = dets

    if not identities_seen:
        raise GenerationError("no identity ever appeared; raise entry_rate")
    if not embeddings:
        raise GenerationError("no detection survived; lower miss_probability")

    # stratify query identities over both dwell profiles so the query
    # set never degenerates to only-loiterers or only-passers
    first_passer = n - n_passers
    seen_loiter = [i for i in sorted(identities_seen) if i < first_passer]
    seen_pass = [i for i in sorted(identities_seen) if i >= first_passer]
    n_queries = min(config.n_queries, len(identities_seen))
    want_loiter = min(len(seen_loiter), (n_queries + 1) // 2)
    want_pass = min(len(seen_pass), n_queries - want_loiter)
    want_loiter = n_queries - want_pass
    picked: list[int] = []
    for pool, want in ((seen_loiter, want_loiter), (seen_pass, want_pass)):
        if want:
            chosen = rng.choice(len(pool), size=want, replace=False)
            picked.extend(pool[int(c)] for c in chosen)
    queries = []
    for k, idx in enumerate(sorted(picked)):
        noise = config.query_noise * rng.normal(size=config.embedding_dim) / sqrt_d
        queries.append(
            Query(
                query_id=f"q{k:02d}",
                identity=identity_labels[idx],
                embedding=unit_vector(anchors[idx] + noise),
            )
        )

    return Dataset(
        detections=detections,
        ground_truth=GroundTruth(gt_records),
        embeddings=EmbeddingTable(embeddings),
        scores=scores,
        queries=queries,
    )


def _respawn(rng: np.random.Generator, walker: _Walker, frame_w: float, w: float) -> None:
    walker.x = float(rng.uniform(0.0, frame_w - w))
    walker.direction = 1.0 if rng.random() < 0.5 else -1.0
    walker.target_x = float(rng.uniform(0.0, frame_w - w))


def _advance(
    rng: np.random.Generator, walker: _Walker, speed: float, frame_w: float, w: float
) -> None:
    hi = frame_w - w
    if walker.paired:
        walker.x += walker.direction * speed
        if walker.x < 0.0:
            walker.x = 0.0
            walker.direction = 1.0
        elif walker.x > hi:
            walker.x = hi
            walker.direction = -1.0
    else:
        gap = walker.target_x - walker.x
        if abs(gap) <= speed:
            walker.x = walker.target_x
            walker.target_x = float(rng.uniform(0.0, hi))
        else:
            walker.x += speed if gap > 0 else -speed


def _detect(
    rng: np.random.Generator,
    config: WorldConfig,
    video: str,
    frame: int,
    identity_index: int,
    gt_box: BoundingBox,
    anchor: np.ndarray,
    sqrt_d: float,
    embeddings: dict[str, np.ndarray],
    scores: dict[str, float],
) -> Detection | None:
    if rng.random() < config.miss_probability:
        return None
    bad = rng.random() < config.bad_crop_probability
    if bad:
        # a botched crop: vertical cut, horizontal drift, warped width;
        # keeping under half the height caps IoU against the true box
        # below 0.5 no matter how the width is warped
        keep = rng.uniform(0.30, 0.48)
        h = max(2.0, gt_box.h * keep)
        y = gt_box.y if rng.random() < 0.5 else gt_box.y + gt_box.h - h
        w = max(2.0, gt_box.w * rng.uniform(0.7, 1.4))
        x = gt_box.x + rng.uniform(-0.3, 0.3) * gt_box.w
        confidence = float(rng.uniform(*config.bad_confidence))
        random_dir = unit_vector(rng.normal(size=config.embedding_dim))
        lam = config.bad_crop_weight
        embedding = unit_vector((1.0 - lam) * anchor + lam * random_dir)
        if rng.random() < config.scorer_fidelity:
            score = float(rng.uniform(0.0, 0.5))
        else:
            score = float(rng.uniform(0.5, 1.0))
    else:
        sigma = config.box_jitter_sigma
        x = gt_box.x + rng.normal(0.0, sigma)
        y = gt_box.y + rng.normal(0.0, sigma)
        w = max(2.0, gt_box.w + rng.normal(0.0, sigma))
        h = max(2.0, gt_box.h + rng.normal(0.0, sigma))
        confidence = float(rng.uniform(*config.clean_confidence))
        noise = config.clean_noise * rng.normal(size=config.embedding_dim) / sqrt_d
        embedding = unit_vector(anchor + noise)
        score = float(rng.uniform(0.5, 1.0))
    crop_ref = f"{video}:f{frame}:i{identity_index}"
    embeddings[crop_ref] = embedding
    scores[crop_ref] = score
    confidence = min(1.0, max(0.0, confidence))
    return Detection(
        video_id=video,
        frame=frame,
        box=BoundingBox(x, y, w, h),
        confidence=confidence,
        crop_ref=crop_ref,
    )


def persistent_world(config: WorldConfig) -> WorldConfig:
    """Variant where everyone is present in every frame and detection is perfect."""
    return replace(
        config,
        entry_rate=1.0,
        exit_rate=0.0,
        passer_fraction=0.0,
        miss_probability=0.0,
        bad_crop_probability=0.0,
        box_jitter_sigma=0.0,
        crossing_rate=0.0,
        clean_confidence=(0.9, 0.99),
    )


# --------------------------------------------------------------------------
# test oracles: naive, independent re-derivations
# --------------------------------------------------------------------------


def _oracle_iou(a: BoundingBox, b: BoundingBox) -> float:
    left = max(a.x, b.x)
    right = min(a.x + a.w, b.x + b.w)
    top = max(a.y, b.y)
    bottom = min(a.y + a.h, b.y + b.h)
    if right <= left or bottom <= top:
        return 0.0
    inter = (right - left) * (bottom - top)
    return inter / (a.w * a.h + b.w * b.h - inter)


def _oracle_greedy(
    boxes: Sequence[BoundingBox],
    detections: Sequence[Detection],
    threshold: float,
) -> dict[int, int]:
    """Repeatedly pick the globally best remaining pair; smallest indices on ties."""
    assigned: dict[int, int] = {}
    used: set[int] = set()
    while True:
        best: tuple[float, int, int] | None = None
        for ti, box in enumerate(boxes):
            if ti in assigned:
                continue
            for di, det in enumerate(detections):
                if di in used:
                    continue
                value = _oracle_iou(box, det.box)
                if value < threshold:
                    continue
                if (
                    best is None
                    or value > best[0]
                    or (value == best[0] and (ti, di) < (best[1], best[2]))
                ):
                    best = (value, ti, di)
        if best is None:
            return assigned
        assigned[best[1]] = best[2]
        used.add(best[2])


def oracle_tracklets(
    frames: Sequence[Sequence[Detection]], config: TrackletBuildConfig
) -> list[Tracklet]:
    """Straight-line re-derivation of the tracklet builder for small instances."""
    if len(frames) > 200:
        raise ValidationError("oracle refuses instances over 200 frames")
    if any(len(dets) > 5 for dets in frames):
        raise ValidationError("oracle refuses more than 5 simultaneous targets")

    if config.mode is Mode.BASELINE:
        flat = [d for dets in frames for d in dets]
        return [Tracklet(id=i, detections=(d,)) for i, d in enumerate(flat)]
    if config.mode is Mode.SKIP:
        flat = [
            d for k, dets in enumerate(frames) if k % config.max_len == 0 for d in dets
        ]
        return [Tracklet(id=i, detections=(d,)) for i, d in enumerate(flat)]

    open_tracks: list[dict] = []
    finished: list[dict] = []
    next_id = 0
    for k, raw in enumerate(frames):
        dets = list(raw)
        if k % config.max_len == 0:
            survivors = []
            for t in open_tracks:
                if len(t["dets"]) >= config.max_len:
                    finished.append(t)
                else:
                    survivors.append(t)
            open_tracks = survivors
            assigned = _oracle_greedy(
                [t["box"] for t in open_tracks], dets, config.iou_match_threshold
            )
            survivors = []
            for ti, t in enumerate(open_tracks):
                if ti in assigned:
                    det = dets[assigned[ti]]
                    t["dets"].append(det)
                    t["box"] = det.box
                    survivors.append(t)
                else:
                    finished.append(t)
            open_tracks = survivors
            claimed = set(assigned.values())
            for di, det in enumerate(dets):
                if di not in claimed:
                    open_tracks.append({"id": next_id, "dets": [det], "box": det.box})
                    next_id += 1
        else:
            survivors = []
            for t in open_tracks:
                if len(t["dets"]) >= config.max_len:
                    finished.append(t)
                else:
                    survivors.append(t)
            open_tracks = survivors
            assigned = _oracle_greedy(
                [t["box"] for t in open_tracks], dets, config.iou_match_threshold
            )
            survivors = []
            for ti, t in enumerate(open_tracks):
                if ti in assigned:
                    det = dets[assigned[ti]]
                    t["dets"].append(det)
                    t["box"] = det.box
                    survivors.append(t)
                else:
                    finished.append(t)
            open_tracks = survivors
    finished.extend(open_tracks)
    finished.sort(key=lambda t: t["id"])
    return [Tracklet(id=t["id"], detections=tuple(t["dets"])) for t in finished]


@dataclass(frozen=True)
class OracleMetrics:
    points: tuple[tuple[float, float | None, float | None], ...]
    f1_star: float
    beta_star: float
    map_score: float
    fr_at_star: float | None
    tvr_at_star: float | None


def oracle_metrics(
    outcomes_by_beta: Mapping[float, Sequence[AlertOutcome]],
    ground_truth: GroundTruth,
    identity_of: Mapping[str, str],
) -> OracleMetrics:
    """Exhaustive nested-loop recomputation of every metric.

    Presence, matching, the best F1, and the curve area are all
    re-derived from scratch here; nothing is shared with the evaluator
    beyond the input types.
    """

    def present_in(chunk, identity: str) -> bool:
        for rec in ground_truth.records:
            if (
                rec.video_id == chunk.video_id
                and rec.identity == identity
                and chunk.start_frame <= rec.frame < chunk.end_frame
            ):
                return True
        return False

    def hit(outcome: AlertOutcome, identity: str) -> bool:
        for cand in outcome.candidates:
            det = cand.gallery_image.detection
            for rec in ground_truth.records:
                if (
                    rec.video_id == det.video_id
                    and rec.frame == det.frame
                    and rec.identity == identity
                ):
                    if _oracle_iou(det.box, rec.box) >= 0.5:
                        return True
        return False

    points: list[tuple[float, float | None, float | None]] = []
    for beta in sorted(outcomes_by_beta):
        outcomes = outcomes_by_beta[beta]
        n_present = 0
        n_found = 0
        n_alerts = 0
        n_valid = 0
        for outcome in outcomes:
            identity = identity_of[outcome.query_id]
            was_hit = hit(outcome, identity)
            if present_in(outcome.chunk, identity):
                n_present += 1
                if outcome.raised and was_hit:
                    n_found += 1
            if outcome.raised:
                n_alerts += 1
                if was_hit:
                    n_valid += 1
        fr = n_found / n_present if n_present else None
        tvr = n_valid / n_alerts if n_alerts else None
        points.append((beta, fr, tvr))

    best_f1 = None
    best_beta = None
    for beta, fr, tvr in points:
        if fr is None or tvr is None:
            continue
        value = 0.0 if fr == 0.0 and tvr == 0.0 else 2.0 * fr * tvr / (fr + tvr)
        if best_f1 is None or value > best_f1:
            best_f1 = value
            best_beta = beta
    if best_f1 is None or best_beta is None:
        raise EvaluationError("every oracle point is undefined")

    defined = [(fr, tvr) for _beta, fr, tvr in points if fr is not None and tvr is not None]
    defined = sorted(defined, key=lambda p: p[0])
    xs: list[float] = [0.0]
    ys: list[float] = []
    i = 0
    while i < len(defined):
        j = i
        total = 0.0
        while j < len(defined) and defined[j][0] == defined[i][0]:
            total += defined[j][1]
            j += 1
        xs.append(defined[i][0])
        ys.append(total / (j - i))
        i = j
    ys.insert(0, ys[0])
    area = 0.0
    for k in range(len(xs) - 1):
        area += (xs[k + 1] - xs[k]) * (ys[k] + ys[k + 1]) / 2.0

    fr_at = next(fr for beta, fr, _tvr in points if beta == best_beta)
    tvr_at = next(tvr for beta, _fr, tvr in points if beta == best_beta)
    return OracleMetrics(
        points=tuple(points),
        f1_star=best_f1,
        beta_star=best_beta,
        map_score=area,
        fr_at_star=fr_at,
        tvr_at_star=tvr_at,
    )
