"""Loading, validation, and writing of the delimited input tables.

All tables are comma-separated text files with an explicit header:

* detections    ``video,frame,x,y,w,h,conf,crop_ref``
* ground truth  ``video,frame,identity,x,y,w,h``
* embeddings    ``ref,dim,v0,...,v{d-1}``
* queries       ``query_id,identity,dim,v0,...,v{d-1}``
* scores        ``crop_ref,score``

Floats are written with ``repr`` so every table round-trips through
load -> write -> load without changing a single bit.
"""

from __future__ import annotations

import csv
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from livereid.core import (
    BoundingBox,
    Detection,
    ParseError,
    Query,
    ValidationError,
    unit_vector,
)

DETECTIONS_FILE = "detections.csv"
GROUND_TRUTH_FILE = "ground_truth.csv"
EMBEDDINGS_FILE = "embeddings.csv"
QUERIES_FILE = "queries.csv"
SCORES_FILE = "scores.csv"

DEFAULT_MIN_CONFIDENCE = 0.5

_DETECTION_COLUMNS = ["video", "frame", "x", "y", "w", "h", "conf", "crop_ref"]
_GROUND_TRUTH_COLUMNS = ["video", "frame", "identity", "x", "y", "w", "h"]
_SCORE_COLUMNS = ["crop_ref", "score"]


def _fmt(value: float) -> str:
    return repr(float(value))


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a torn file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def _rows(path: str | Path, expected_columns: int) -> Iterator[tuple[int, list[str]]]:
    """Yield (line number, cells) for every non-header line of ``path``."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for line_no, cells in enumerate(reader, start=1):
            if line_no == 1:
                continue
            if not cells:
                continue
            if len(cells) != expected_columns:
                raise ParseError(
                    path, line_no,
                    f"expected {expected_columns} fields, got {len(cells)}",
                )
            yield line_no, [c.strip() for c in cells]


def _parse_float(path: Path, line_no: int, name: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ParseError(path, line_no, f"{name} is not a number: {raw!r}") from None


def _parse_int(path: Path, line_no: int, name: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ParseError(path, line_no, f"{name} is not an integer: {raw!r}") from None


def _check_header(path: str | Path, expected: Sequence[str]) -> None:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
    if header is None:
        raise ParseError(path, 1, "missing header line")
    if [c.strip() for c in header] != list(expected):
        raise ParseError(path, 1, f"bad header, expected {','.join(expected)}")


def load_detections(path: str | Path) -> dict[str, list[Detection]]:
    """Load a detection stream grouped by video and sorted by frame.

    Sorting is stable, so detections sharing a frame keep their file
    order. Every ``crop_ref`` must be unique within its video.
    """
    path = Path(path)
    _check_header(path, _DETECTION_COLUMNS)
    per_video: dict[str, list[Detection]] = {}
    seen: dict[str, set[str]] = {}
    for line_no, cells in _rows(path, len(_DETECTION_COLUMNS)):
        video, frame_s, x, y, w, h, conf, crop_ref = cells
        if not video or not crop_ref:
            raise ParseError(path, line_no, "video and crop_ref must be non-empty")
        frame = _parse_int(path, line_no, "frame", frame_s)
        try:
            det = Detection(
                video_id=video,
                frame=frame,
                box=BoundingBox(
                    _parse_float(path, line_no, "x", x),
                    _parse_float(path, line_no, "y", y),
                    _parse_float(path, line_no, "w", w),
                    _parse_float(path, line_no, "h", h),
                ),
                confidence=_parse_float(path, line_no, "conf", conf),
                crop_ref=crop_ref,
            )
        except ValidationError as exc:
            raise ValidationError(f"{path}, line {line_no}: {exc}") from None
        refs = seen.setdefault(video, set())
        if crop_ref in refs:
            raise ValidationError(
                f"{path}, line {line_no}: duplicate crop_ref {crop_ref!r} in video {video!r}"
            )
        refs.add(crop_ref)
        per_video.setdefault(video, []).append(det)
    for dets in per_video.values():
        dets.sort(key=lambda d: d.frame)
    return per_video


def write_detections(path: str | Path, detections: Mapping[str, Sequence[Detection]]) -> None:
    lines = [",".join(_DETECTION_COLUMNS)]
    for video, dets in detections.items():
        for d in dets:
            lines.append(
                ",".join(
                    [
                        video,
                        str(d.frame),
                        _fmt(d.box.x),
                        _fmt(d.box.y),
                        _fmt(d.box.w),
                        _fmt(d.box.h),
                        _fmt(d.confidence),
                        d.crop_ref,
                    ]
                )
            )
    atomic_write_text(path, "\n".join(lines) + "\n")


def filter_detections(
    detections: Sequence[Detection], min_confidence: float = DEFAULT_MIN_CONFIDENCE
) -> list[Detection]:
    """Keep detections whose confidence is at least ``min_confidence``."""
    return [d for d in detections if d.confidence >= min_confidence]


@dataclass(frozen=True)
class GroundTruthRecord:
    video_id: str
    frame: int
    identity: str
    box: BoundingBox


class GroundTruth:
    """Indexed ground-truth boxes: at most one per (video, frame, identity)."""

    def __init__(self, records: Iterable[GroundTruthRecord]):
        self.records: tuple[GroundTruthRecord, ...] = tuple(records)
        self._by_frame: dict[tuple[str, int], dict[str, BoundingBox]] = {}
        self._frames: dict[tuple[str, str], list[int]] = {}
        for rec in self.records:
            frame_boxes = self._by_frame.setdefault((rec.video_id, rec.frame), {})
            if rec.identity in frame_boxes:
                raise ValidationError(
                    f"duplicate ground-truth box for identity {rec.identity!r} "
                    f"on frame {rec.frame} of video {rec.video_id!r}"
                )
            frame_boxes[rec.identity] = rec.box
            self._frames.setdefault((rec.video_id, rec.identity), []).append(rec.frame)
        for frames in self._frames.values():
            frames.sort()
        self.identities: frozenset[str] = frozenset(r.identity for r in self.records)

    def box_for(self, video_id: str, frame: int, identity: str) -> BoundingBox | None:
        return self._by_frame.get((video_id, frame), {}).get(identity)

    def boxes_on(self, video_id: str, frame: int) -> Mapping[str, BoundingBox]:
        return self._by_frame.get((video_id, frame), {})

    def identity_present(self, video_id: str, start: int, end: int, identity: str) -> bool:
        """True when the identity has a box on some frame in [start, end)."""
        frames = self._frames.get((video_id, identity))
        if not frames:
            return False
        i = bisect_left(frames, start)
        return i < len(frames) and frames[i] < end

    def frames_for(self, video_id: str, identity: str) -> list[int]:
        return list(self._frames.get((video_id, identity), []))

    def videos(self) -> list[str]:
        return sorted({r.video_id for r in self.records})

    def max_frame(self, video_id: str) -> int | None:
        frames = [r.frame for r in self.records if r.video_id == video_id]
        return max(frames) if frames else None


def load_ground_truth(path: str | Path) -> GroundTruth:
    path = Path(path)
    _check_header(path, _GROUND_TRUTH_COLUMNS)
    records = []
    for line_no, cells in _rows(path, len(_GROUND_TRUTH_COLUMNS)):
        video, frame_s, identity, x, y, w, h = cells
        if not video or not identity:
            raise ParseError(path, line_no, "video and identity must be non-empty")
        frame = _parse_int(path, line_no, "frame", frame_s)
        if frame < 0:
            raise ValidationError(f"{path}, line {line_no}: negative frame index {frame}")
        try:
            box = BoundingBox(
                _parse_float(path, line_no, "x", x),
                _parse_float(path, line_no, "y", y),
                _parse_float(path, line_no, "w", w),
                _parse_float(path, line_no, "h", h),
            )
        except ValidationError as exc:
            raise ValidationError(f"{path}, line {line_no}: {exc}") from None
        records.append(GroundTruthRecord(video, frame, identity, box))
    return GroundTruth(records)


def write_ground_truth(path: str | Path, ground_truth: GroundTruth) -> None:
    lines = [",".join(_GROUND_TRUTH_COLUMNS)]
    for r in ground_truth.records:
        lines.append(
            ",".join(
                [r.video_id, str(r.frame), r.identity,
                 _fmt(r.box.x), _fmt(r.box.y), _fmt(r.box.w), _fmt(r.box.h)]
            )
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


class EmbeddingTable:
    """Unit-norm embedding per crop reference, all with one dimension."""

    def __init__(self, vectors: Mapping[str, object]):
        if not vectors:
            raise ValidationError("embedding table is empty")
        self.vectors: dict[str, np.ndarray] = {}
        dim: int | None = None
        for ref, raw in vectors.items():
            vec = unit_vector(raw)
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise ValidationError(
                    f"embedding for {ref!r} has dim {vec.size}, expected {dim}"
                )
            self.vectors[ref] = vec
        self.dim: int = int(dim)  # type: ignore[arg-type]

    def __contains__(self, ref: str) -> bool:
        return ref in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, ref: str) -> np.ndarray:
        try:
            return self.vectors[ref]
        except KeyError:
            raise ValidationError(f"no embedding for crop_ref {ref!r}") from None

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self.vectors.items())


def _embedding_header(dim: int, key_column: str, extra: Sequence[str] = ()) -> list[str]:
    return [key_column, *extra, "dim", *[f"v{i}" for i in range(dim)]]


def load_embeddings(path: str | Path) -> EmbeddingTable:
    path = Path(path)
    with path.open(newline="") as fh:
        header = next(csv.reader(fh), None)
    if header is None:
        raise ParseError(path, 1, "missing header line")
    header = [c.strip() for c in header]
    dim = len(header) - 2
    if dim < 1 or header != _embedding_header(dim, "ref"):
        raise ParseError(path, 1, "bad header, expected ref,dim,v0,...")
    vectors: dict[str, np.ndarray] = {}
    for line_no, cells in _rows(path, len(header)):
        ref = cells[0]
        if not ref:
            raise ParseError(path, line_no, "ref must be non-empty")
        if ref in vectors:
            raise ValidationError(f"{path}, line {line_no}: duplicate ref {ref!r}")
        row_dim = _parse_int(path, line_no, "dim", cells[1])
        if row_dim != dim:
            raise ValidationError(
                f"{path}, line {line_no}: dim {row_dim} does not match table dim {dim}"
            )
        values = [
            _parse_float(path, line_no, f"v{i}", cells[2 + i]) for i in range(dim)
        ]
        try:
            vectors[ref] = unit_vector(values)
        except ValidationError as exc:
            raise ValidationError(f"{path}, line {line_no}: {exc}") from None
    return EmbeddingTable(vectors)


def write_embeddings(path: str | Path, table: EmbeddingTable) -> None:
    lines = [",".join(_embedding_header(table.dim, "ref"))]
    for ref, vec in table.items():
        lines.append(",".join([ref, str(table.dim), *(_fmt(v) for v in vec)]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_queries(
    path: str | Path, known_identities: Iterable[str] | None = None
) -> list[Query]:
    """Load queries; with ``known_identities`` given, enforce referential integrity."""
    path = Path(path)
    with path.open(newline="") as fh:
        header = next(csv.reader(fh), None)
    if header is None:
        raise ParseError(path, 1, "missing header line")
    header = [c.strip() for c in header]
    dim = len(header) - 3
    if dim < 1 or header != _embedding_header(dim, "query_id", ["identity"]):
        raise ParseError(path, 1, "bad header, expected query_id,identity,dim,v0,...")
    known = set(known_identities) if known_identities is not None else None
    queries: list[Query] = []
    seen: set[str] = set()
    for line_no, cells in _rows(path, len(header)):
        query_id, identity = cells[0], cells[1]
        if not query_id or not identity:
            raise ParseError(path, line_no, "query_id and identity must be non-empty")
        if query_id in seen:
            raise ValidationError(f"{path}, line {line_no}: duplicate query_id {query_id!r}")
        seen.add(query_id)
        if known is not None and identity not in known:
            raise ValidationError(
                f"{path}, line {line_no}: query {query_id!r} references unknown identity {identity!r}"
            )
        row_dim = _parse_int(path, line_no, "dim", cells[2])
        if row_dim != dim:
            raise ValidationError(
                f"{path}, line {line_no}: dim {row_dim} does not match table dim {dim}"
            )
        values = [
            _parse_float(path, line_no, f"v{i}", cells[3 + i]) for i in range(dim)
        ]
        try:
            embedding = unit_vector(values)
        except ValidationError as exc:
            raise ValidationError(f"{path}, line {line_no}: {exc}") from None
        queries.append(Query(query_id=query_id, identity=identity, embedding=embedding))
    return queries


def write_queries(path: str | Path, queries: Sequence[Query]) -> None:
    if not queries:
        raise ValidationError("cannot write an empty query table")
    dim = queries[0].embedding.size
    lines = [",".join(_embedding_header(dim, "query_id", ["identity"]))]
    for q in queries:
        lines.append(
            ",".join([q.query_id, q.identity, str(dim), *(_fmt(v) for v in q.embedding)])
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_scores(path: str | Path) -> dict[str, float]:
    path = Path(path)
    _check_header(path, _SCORE_COLUMNS)
    scores: dict[str, float] = {}
    for line_no, cells in _rows(path, len(_SCORE_COLUMNS)):
        ref, raw = cells
        if not ref:
            raise ParseError(path, line_no, "crop_ref must be non-empty")
        if ref in scores:
            raise ValidationError(f"{path}, line {line_no}: duplicate crop_ref {ref!r}")
        value = _parse_float(path, line_no, "score", raw)
        if not np.isfinite(value):
            raise ValidationError(f"{path}, line {line_no}: score must be finite")
        scores[ref] = value
    return scores


def write_scores(path: str | Path, scores: Mapping[str, float]) -> None:
    lines = [",".join(_SCORE_COLUMNS)]
    for ref, value in scores.items():
        lines.append(f"{ref},{_fmt(value)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


@dataclass(frozen=True)
class Dataset:
    """Everything one run consumes, as loaded from a data directory."""

    detections: dict[str, list[Detection]]
    ground_truth: GroundTruth
    embeddings: EmbeddingTable
    scores: dict[str, float] = field(default_factory=dict)
    queries: list[Query] = field(default_factory=list)


def load_dataset(directory: str | Path) -> Dataset:
    directory = Path(directory)
    ground_truth = load_ground_truth(directory / GROUND_TRUTH_FILE)
    scores_path = directory / SCORES_FILE
    return Dataset(
        detections=load_detections(directory / DETECTIONS_FILE),
        ground_truth=ground_truth,
        embeddings=load_embeddings(directory / EMBEDDINGS_FILE),
        scores=load_scores(scores_path) if scores_path.exists() else {},
        queries=load_queries(directory / QUERIES_FILE, ground_truth.identities),
    )


def write_dataset(dataset: Dataset, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_detections(directory / DETECTIONS_FILE, dataset.detections)
    write_ground_truth(directory / GROUND_TRUTH_FILE, dataset.ground_truth)
    write_embeddings(directory / EMBEDDINGS_FILE, dataset.embeddings)
    write_scores(directory / SCORES_FILE, dataset.scores)
    write_queries(directory / QUERIES_FILE, dataset.queries)
