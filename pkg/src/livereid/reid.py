"""Open-set query matching against chunk galleries.

Similarity is cosine on unit embeddings, mapped to [0, 1] so it is
directly comparable with the alert threshold beta. An alert fires when
the best candidate reaches beta; the top candidates are then presented
for validation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from livereid.core import Chunk, ConfigurationError, GalleryImage, Query
from livereid.ingest import EmbeddingTable


@dataclass(frozen=True)
class RankedCandidate:
    """One gallery image with its query similarity; ranks start at 1."""

    gallery_image: GalleryImage
    score: float
    rank: int


@dataclass(frozen=True)
class QueryChunkRanking:
    """Top candidates for one (query, chunk) search, best first."""

    query_id: str
    chunk: Chunk
    gallery_size: int
    candidates: tuple[RankedCandidate, ...]

    @property
    def top_score(self) -> float | None:
        return self.candidates[0].score if self.candidates else None


@dataclass(frozen=True)
class AlertOutcome:
    """What the operator sees for one (query, chunk) pair at one threshold."""

    query_id: str
    chunk: Chunk
    raised: bool
    candidates: tuple[RankedCandidate, ...]
    top_score: float | None


def rank_gallery(
    query: Query, gallery: Sequence[GalleryImage], embeddings: EmbeddingTable
) -> list[RankedCandidate]:
    """Rank the whole gallery by similarity to the query, best first.

    Exact score ties break by frame, then gallery order. A gallery
    image without an embedding is a hard error.
    """
    if not gallery:
        return []
    if query.embedding.size != embeddings.dim:
        raise ConfigurationError(
            f"query {query.query_id!r} has dim {query.embedding.size}, "
            f"embedding table has dim {embeddings.dim}"
        )
    matrix = np.stack([embeddings.get(img.detection.crop_ref) for img in gallery])
    scores = np.clip((matrix @ query.embedding + 1.0) / 2.0, 0.0, 1.0)
    order = sorted(
        range(len(gallery)),
        key=lambda i: (-scores[i], gallery[i].detection.frame, i),
    )
    return [
        RankedCandidate(gallery_image=gallery[i], score=float(scores[i]), rank=rank)
        for rank, i in enumerate(order, start=1)
    ]


def decide_alert(
    query_id: str,
    chunk: Chunk,
    ranked: Sequence[RankedCandidate],
    beta: float,
    eta: int,
) -> AlertOutcome:
    """Raise an alert iff the best score reaches beta; present the top eta."""
    if not 0.0 <= beta <= 1.0:
        raise ConfigurationError(f"beta must be in [0, 1], got {beta}")
    if eta < 1:
        raise ConfigurationError(f"eta must be >= 1, got {eta}")
    top_score = ranked[0].score if ranked else None
    raised = top_score is not None and top_score >= beta
    return AlertOutcome(
        query_id=query_id,
        chunk=chunk,
        raised=raised,
        candidates=tuple(ranked[:eta]),
        top_score=top_score,
    )
