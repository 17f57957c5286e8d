"""End-to-end orchestration: chunk each video, build per-chunk galleries
in the configured mode, rank every query against every gallery, and
keep enough of each ranking to evaluate any alert threshold later.

Everything here is deterministic: two runs over the same inputs with
the same config produce identical results, file for file.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from livereid.core import (
    BoundingBox,
    Chunk,
    ConfigurationError,
    Detection,
    GalleryImage,
    Mode,
    ParseError,
    ValidationError,
)
from livereid.ingest import Dataset, atomic_write_text, filter_detections
from livereid.reid import QueryChunkRanking, RankedCandidate, rank_gallery
from livereid.selector import HeuristicScorerConfig, build_gallery, make_scorer
from livereid.tracker import TrackletBuildConfig, build_tracklets, make_tracker

RUN_CONFIG_FILE = "run_config.json"
GALLERIES_FILE = "galleries.csv"
QUERY_CHUNKS_FILE = "query_chunks.csv"
RANKINGS_FILE = "rankings.csv"

_GALLERY_COLUMNS = [
    "video", "chunk_start", "chunk_end", "tracklet_id",
    "frame", "x", "y", "w", "h", "conf", "crop_ref", "normality_score",
]
_QUERY_CHUNK_COLUMNS = [
    "query_id", "video", "chunk_start", "chunk_end", "gallery_size", "top_score",
]
_RANKING_COLUMNS = [
    "query_id", "video", "chunk_start", "chunk_end", "rank", "score",
    "tracklet_id", "frame", "x", "y", "w", "h", "conf", "crop_ref", "normality_score",
]


@dataclass(frozen=True)
class PipelineConfig:
    """Full configuration of one run."""

    mode: Mode = Mode.TRADE
    n: int = 20                      # tracklet length cap / detector stride
    tau: int = 1000                  # chunk length in frames
    eta: int = 20                    # candidates presented per alert
    beta_step: float = 0.02          # threshold grid spacing
    scorer: str = "heuristic"
    tracker: str = "greedy-iou"
    seed: int = 0
    iou_match_threshold: float = 0.3
    min_confidence: float = 0.5
    frame_width: float = 1280.0      # used by the heuristic scorer
    frame_height: float = 720.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")
        if self.tau < 1:
            raise ConfigurationError(f"tau must be >= 1, got {self.tau}")
        if self.eta < 1:
            raise ConfigurationError(f"eta must be >= 1, got {self.eta}")
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ConfigurationError("min_confidence must be in [0, 1]")
        self.beta_grid()  # validates beta_step

    def beta_grid(self) -> tuple[float, ...]:
        """Thresholds 0, step, 2*step, ..., 1; the step must divide 1."""
        step = self.beta_step
        if not 0.0 < step <= 1.0:
            raise ConfigurationError(f"beta_step must be in (0, 1], got {step}")
        count = round(1.0 / step)
        if abs(count * step - 1.0) > 1e-9:
            raise ConfigurationError(f"beta_step {step} does not divide 1")
        return tuple(round(i * step, 10) for i in range(count + 1))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "n": self.n,
            "tau": self.tau,
            "eta": self.eta,
            "beta_step": self.beta_step,
            "scorer": self.scorer,
            "tracker": self.tracker,
            "seed": self.seed,
            "iou_match_threshold": self.iou_match_threshold,
            "min_confidence": self.min_confidence,
            "frame_width": self.frame_width,
            "frame_height": self.frame_height,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        data["mode"] = Mode(data["mode"])
        return cls(**data)


def chunk_video(video_id: str, n_frames: int, tau: int) -> list[Chunk]:
    """Partition frames [0, n_frames) into consecutive chunks of at most tau."""
    if tau < 1:
        raise ConfigurationError(f"tau must be >= 1, got {tau}")
    if n_frames <= 0:
        return []
    return [
        Chunk(video_id, start, min(start + tau, n_frames))
        for start in range(0, n_frames, tau)
    ]


@dataclass(frozen=True)
class ChunkResult:
    chunk: Chunk
    gallery: tuple[GalleryImage, ...]


@dataclass(frozen=True)
class RunResult:
    config: PipelineConfig
    chunks: tuple[ChunkResult, ...]
    rankings: tuple[QueryChunkRanking, ...]

    @property
    def gallery_sizes(self) -> tuple[int, ...]:
        return tuple(len(c.gallery) for c in self.chunks)

    @property
    def similarity_ops(self) -> int:
        """Number of query-to-gallery comparisons performed across the run."""
        return sum(r.gallery_size for r in self.rankings)


def _validate_inputs(config: PipelineConfig, dataset: Dataset,
                     filtered: dict[str, list[Detection]]) -> None:
    if not dataset.queries:
        raise ConfigurationError("a run needs at least one query")
    for query in dataset.queries:
        if query.embedding.size != dataset.embeddings.dim:
            raise ConfigurationError(
                f"query {query.query_id!r} has dim {query.embedding.size}, "
                f"embedding table has dim {dataset.embeddings.dim}"
            )
    # abort before any scoring if a surviving crop lacks its embedding
    # (or, with the table scorer, its score)
    for dets in filtered.values():
        for det in dets:
            if det.crop_ref not in dataset.embeddings:
                raise ValidationError(f"no embedding for crop_ref {det.crop_ref!r}")
            if config.scorer == "table" and det.crop_ref not in dataset.scores:
                raise ValidationError(
                    f"no normality score for crop_ref {det.crop_ref!r}"
                )


def run(config: PipelineConfig, dataset: Dataset) -> RunResult:
    """Process every chunk of every video and rank all queries against it."""
    filtered = {
        video: filter_detections(dets, config.min_confidence)
        for video, dets in dataset.detections.items()
    }
    _validate_inputs(config, dataset, filtered)

    scorer = make_scorer(
        config.scorer,
        score_table=dataset.scores,
        heuristic=HeuristicScorerConfig(
            frame_width=config.frame_width, frame_height=config.frame_height
        ),
    )
    tracker = make_tracker(config.tracker, config.iou_match_threshold)
    build_config = TrackletBuildConfig(
        max_len=config.n,
        iou_match_threshold=config.iou_match_threshold,
        mode=config.mode,
    )

    videos = sorted(set(filtered) | set(dataset.ground_truth.videos()))
    chunk_results: list[ChunkResult] = []
    rankings: list[QueryChunkRanking] = []
    for video in videos:
        last = -1
        for det in filtered.get(video, []):
            last = max(last, det.frame)
        gt_last = dataset.ground_truth.max_frame(video)
        if gt_last is not None:
            last = max(last, gt_last)
        for chunk in chunk_video(video, last + 1, config.tau):
            frames: list[list[Detection]] = [[] for _ in range(len(chunk))]
            for det in filtered.get(video, []):
                if chunk.start_frame <= det.frame < chunk.end_frame:
                    frames[det.frame - chunk.start_frame].append(det)
            tracklets = build_tracklets(frames, build_config, tracker)
            gallery = tuple(build_gallery(tracklets, scorer))
            chunk_results.append(ChunkResult(chunk=chunk, gallery=gallery))
            for query in dataset.queries:
                ranked = rank_gallery(query, gallery, dataset.embeddings)
                rankings.append(
                    QueryChunkRanking(
                        query_id=query.query_id,
                        chunk=chunk,
                        gallery_size=len(gallery),
                        candidates=tuple(ranked[: config.eta]),
                    )
                )
    return RunResult(
        config=config, chunks=tuple(chunk_results), rankings=tuple(rankings)
    )


def _fmt(value: float) -> str:
    return repr(float(value))


def save_run(result: RunResult, directory: str | Path) -> None:
    """Write the run as delimited tables plus its config."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    atomic_write_text(
        directory / RUN_CONFIG_FILE,
        json.dumps(result.config.to_dict(), indent=2, sort_keys=True) + "\n",
    )
    lines = [",".join(_GALLERY_COLUMNS)]
    for cr in result.chunks:
        for img in cr.gallery:
            d = img.detection
            lines.append(",".join([
                cr.chunk.video_id, str(cr.chunk.start_frame), str(cr.chunk.end_frame),
                str(img.tracklet_id), str(d.frame),
                _fmt(d.box.x), _fmt(d.box.y), _fmt(d.box.w), _fmt(d.box.h),
                _fmt(d.confidence), d.crop_ref, _fmt(img.normality_score),
            ]))
    atomic_write_text(directory / GALLERIES_FILE, "\n".join(lines) + "\n")

    lines = [",".join(_QUERY_CHUNK_COLUMNS)]
    for r in result.rankings:
        top = "" if r.top_score is None else _fmt(r.top_score)
        lines.append(",".join([
            r.query_id, r.chunk.video_id,
            str(r.chunk.start_frame), str(r.chunk.end_frame),
            str(r.gallery_size), top,
        ]))
    atomic_write_text(directory / QUERY_CHUNKS_FILE, "\n".join(lines) + "\n")

    lines = [",".join(_RANKING_COLUMNS)]
    for r in result.rankings:
        for cand in r.candidates:
            d = cand.gallery_image.detection
            lines.append(",".join([
                r.query_id, r.chunk.video_id,
                str(r.chunk.start_frame), str(r.chunk.end_frame),
                str(cand.rank), _fmt(cand.score),
                str(cand.gallery_image.tracklet_id), str(d.frame),
                _fmt(d.box.x), _fmt(d.box.y), _fmt(d.box.w), _fmt(d.box.h),
                _fmt(d.confidence), d.crop_ref,
                _fmt(cand.gallery_image.normality_score),
            ]))
    atomic_write_text(directory / RANKINGS_FILE, "\n".join(lines) + "\n")


def load_run(directory: str | Path) -> RunResult:
    """Rebuild a RunResult from the tables written by save_run."""
    directory = Path(directory)
    config = PipelineConfig.from_dict(
        json.loads((directory / RUN_CONFIG_FILE).read_text())
    )

    def read(path: Path, columns: list[str]) -> list[list[str]]:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header] != columns:
                raise ParseError(path, 1, f"bad header, expected {','.join(columns)}")
            return [row for row in reader if row]

    chunk_galleries: dict[tuple[str, int, int], list[GalleryImage]] = {}
    for row in read(directory / GALLERIES_FILE, _GALLERY_COLUMNS):
        video, start, end, tid, frame, x, y, w, h, conf, crop_ref, score = row
        key = (video, int(start), int(end))
        chunk_galleries.setdefault(key, []).append(
            GalleryImage(
                detection=Detection(
                    video_id=video, frame=int(frame),
                    box=BoundingBox(float(x), float(y), float(w), float(h)),
                    confidence=float(conf), crop_ref=crop_ref,
                ),
                tracklet_id=int(tid),
                normality_score=float(score),
            )
        )

    candidates: dict[tuple[str, str, int, int], list[RankedCandidate]] = {}
    for row in read(directory / RANKINGS_FILE, _RANKING_COLUMNS):
        (query_id, video, start, end, rank, score,
         tid, frame, x, y, w, h, conf, crop_ref, normality) = row
        key = (query_id, video, int(start), int(end))
        candidates.setdefault(key, []).append(
            RankedCandidate(
                gallery_image=GalleryImage(
                    detection=Detection(
                        video_id=video, frame=int(frame),
                        box=BoundingBox(float(x), float(y), float(w), float(h)),
                        confidence=float(conf), crop_ref=crop_ref,
                    ),
                    tracklet_id=int(tid),
                    normality_score=float(normality),
                ),
                score=float(score),
                rank=int(rank),
            )
        )

    chunks: list[ChunkResult] = []
    seen_chunks: set[tuple[str, int, int]] = set()
    rankings: list[QueryChunkRanking] = []
    for row in read(directory / QUERY_CHUNKS_FILE, _QUERY_CHUNK_COLUMNS):
        query_id, video, start, end, size, _top = row
        key = (video, int(start), int(end))
        chunk = Chunk(video, int(start), int(end))
        if key not in seen_chunks:
            seen_chunks.add(key)
            chunks.append(
                ChunkResult(chunk=chunk, gallery=tuple(chunk_galleries.get(key, [])))
            )
        ranked = candidates.get((query_id, *key), [])
        ranked.sort(key=lambda c: c.rank)
        rankings.append(
            QueryChunkRanking(
                query_id=query_id,
                chunk=chunk,
                gallery_size=int(size),
                candidates=tuple(ranked),
            )
        )
    return RunResult(config=config, chunks=tuple(chunks), rankings=tuple(rankings))


def with_mode(config: PipelineConfig, mode: Mode, n: int | None = None) -> PipelineConfig:
    """Copy of the config with another gallery mode (and optionally another n)."""
    return replace(config, mode=mode, **({} if n is None else {"n": n}))
