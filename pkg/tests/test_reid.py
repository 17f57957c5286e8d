"""Gallery ranking and alert decisions."""

import numpy as np
import pytest

from livereid.core import (
    BoundingBox,
    Chunk,
    ConfigurationError,
    Detection,
    GalleryImage,
    Query,
    ValidationError,
    unit_vector,
)
from livereid.ingest import EmbeddingTable
from livereid.reid import decide_alert, rank_gallery


def image(ref, frame=0, tid=0):
    return GalleryImage(
        detection=Detection("v", frame, BoundingBox(0, 0, 10, 20), 0.9, ref),
        tracklet_id=tid,
        normality_score=0.5,
    )


def angled(theta):
    return unit_vector([np.cos(theta), np.sin(theta)])


def test_ranking_follows_similarity():
    query = Query("q", "p", angled(0.0))
    gallery = [image("far", frame=0), image("near", frame=1), image("mid", frame=2)]
    table = EmbeddingTable(
        {"far": angled(2.0), "near": angled(0.1), "mid": angled(0.8)}
    )
    ranked = rank_gallery(query, gallery, table)
    assert [c.gallery_image.detection.crop_ref for c in ranked] == ["near", "mid", "far"]
    assert [c.rank for c in ranked] == [1, 2, 3]
    assert ranked[0].score > ranked[1].score > ranked[2].score


def test_scores_are_the_mapped_cosine():
    rng = np.random.default_rng(41)
    for _ in range(30):
        q = unit_vector(rng.normal(size=6))
        vecs = {f"r{i}": unit_vector(rng.normal(size=6)) for i in range(5)}
        table = EmbeddingTable(vecs)
        gallery = [image(ref, frame=i) for i, ref in enumerate(vecs)]
        ranked = rank_gallery(Query("q", "p", q), gallery, table)
        for cand in ranked:
            ref = cand.gallery_image.detection.crop_ref
            want = (float(np.dot(q, table.get(ref))) + 1.0) / 2.0
            want = min(1.0, max(0.0, want))
            assert abs(cand.score - want) < 1e-12


def test_exact_ties_break_by_frame_then_order():
    query = Query("q", "p", angled(0.0))
    same = angled(0.5)
    gallery = [image("late", frame=9), image("early", frame=1), image("twin", frame=1)]
    table = EmbeddingTable({"late": same, "early": same, "twin": same})
    ranked = rank_gallery(query, gallery, table)
    assert [c.gallery_image.detection.crop_ref for c in ranked] == [
        "early", "twin", "late"
    ]


def test_empty_gallery_ranks_nothing():
    query = Query("q", "p", angled(0.0))
    table = EmbeddingTable({"unused": angled(0.1)})
    assert rank_gallery(query, [], table) == []


def test_dimension_mismatch_is_an_error():
    query = Query("q", "p", unit_vector([1.0, 0.0, 0.0]))
    table = EmbeddingTable({"a": angled(0.2)})
    with pytest.raises(ConfigurationError):
        rank_gallery(query, [image("a")], table)


def test_missing_embedding_is_an_error():
    query = Query("q", "p", angled(0.0))
    table = EmbeddingTable({"a": angled(0.2)})
    with pytest.raises(ValidationError):
        rank_gallery(query, [image("b")], table)


def ranked_fixture():
    query = Query("q", "p", angled(0.0))
    refs = [f"r{i}" for i in range(6)]
    table = EmbeddingTable({ref: angled(0.2 + 0.3 * i) for i, ref in enumerate(refs)})
    gallery = [image(ref, frame=i) for i, ref in enumerate(refs)]
    return rank_gallery(query, gallery, table)


def test_alert_threshold_is_inclusive():
    ranked = ranked_fixture()
    chunk = Chunk("v", 0, 100)
    top = ranked[0].score
    assert decide_alert("q", chunk, ranked, top, eta=3).raised
    assert not decide_alert("q", chunk, ranked, min(1.0, top + 1e-9), eta=3).raised
    assert decide_alert("q", chunk, ranked, 0.0, eta=3).raised


def test_alert_presents_at_most_eta():
    ranked = ranked_fixture()
    chunk = Chunk("v", 0, 100)
    outcome = decide_alert("q", chunk, ranked, 0.0, eta=4)
    assert len(outcome.candidates) == 4
    assert [c.rank for c in outcome.candidates] == [1, 2, 3, 4]
    wide = decide_alert("q", chunk, ranked, 0.0, eta=50)
    assert len(wide.candidates) == len(ranked)


def test_alert_on_empty_ranking():
    outcome = decide_alert("q", Chunk("v", 0, 100), [], 0.0, eta=5)
    assert not outcome.raised
    assert outcome.top_score is None
    assert outcome.candidates == ()


def test_alert_parameter_validation():
    ranked = ranked_fixture()
    chunk = Chunk("v", 0, 100)
    with pytest.raises(ConfigurationError):
        decide_alert("q", chunk, ranked, -0.1, eta=3)
    with pytest.raises(ConfigurationError):
        decide_alert("q", chunk, ranked, 1.1, eta=3)
    with pytest.raises(ConfigurationError):
        decide_alert("q", chunk, ranked, 0.5, eta=0)
