"""Geometry and embedding primitives against brute-force checks."""

import math

import numpy as np
import pytest

from livereid.core import (
    BoundingBox,
    Chunk,
    ConfigurationError,
    Detection,
    Tracklet,
    ValidationError,
    cosine_similarity,
    iou,
    map_to_score,
    unit_vector,
)


def grid_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Count unit pixels inside each integer-aligned box; exact for integer coords."""
    ax = {(x, y) for x in range(int(a.x), int(a.right)) for y in range(int(a.y), int(a.bottom))}
    bx = {(x, y) for x in range(int(b.x), int(b.right)) for y in range(int(b.y), int(b.bottom))}
    union = len(ax | bx)
    return len(ax & bx) / union if union else 0.0


def test_iou_half_overlap():
    a = BoundingBox(0, 0, 10, 10)
    b = BoundingBox(5, 0, 10, 10)
    assert abs(iou(a, b) - 50.0 / 150.0) < 1e-12


def test_iou_identical_box():
    a = BoundingBox(3, 4, 7, 9)
    assert iou(a, a) == 1.0


def test_iou_disjoint_and_touching():
    a = BoundingBox(0, 0, 10, 10)
    assert iou(a, BoundingBox(20, 0, 5, 5)) == 0.0
    # sharing only an edge is zero overlap
    assert iou(a, BoundingBox(10, 0, 5, 10)) == 0.0


def test_iou_matches_pixel_grid():
    rng = np.random.default_rng(11)
    for _ in range(300):
        a = BoundingBox(*(float(v) for v in rng.integers(0, 30, size=2)),
                        *(float(v) for v in rng.integers(1, 25, size=2)))
        b = BoundingBox(*(float(v) for v in rng.integers(0, 30, size=2)),
                        *(float(v) for v in rng.integers(1, 25, size=2)))
        assert abs(iou(a, b) - grid_iou(a, b)) < 1e-12
        assert abs(iou(a, b) - iou(b, a)) < 1e-15
        assert 0.0 <= iou(a, b) <= 1.0


def test_box_validation():
    with pytest.raises(ValidationError):
        BoundingBox(0, 0, 0, 5)
    with pytest.raises(ValidationError):
        BoundingBox(0, 0, 5, -1)
    with pytest.raises(ValidationError):
        BoundingBox(float("nan"), 0, 5, 5)


def test_detection_validation():
    box = BoundingBox(0, 0, 5, 5)
    with pytest.raises(ValidationError):
        Detection("v", -1, box, 0.5, "r")
    with pytest.raises(ValidationError):
        Detection("v", 0, box, 1.5, "r")


def test_tracklet_validation():
    box = BoundingBox(0, 0, 5, 5)
    d0 = Detection("v", 0, box, 0.5, "a")
    d1 = Detection("v", 1, box, 0.5, "b")
    other = Detection("w", 2, box, 0.5, "c")
    Tracklet(id=0, detections=(d0, d1))
    with pytest.raises(ValidationError):
        Tracklet(id=0, detections=())
    with pytest.raises(ValidationError):
        Tracklet(id=0, detections=(d1, d0))  # frames must increase
    with pytest.raises(ValidationError):
        Tracklet(id=0, detections=(d0, d0))
    with pytest.raises(ValidationError):
        Tracklet(id=0, detections=(d0, other))


def test_chunk_validation():
    Chunk("v", 0, 1)
    with pytest.raises(ValidationError):
        Chunk("v", 5, 5)
    with pytest.raises(ValidationError):
        Chunk("v", -1, 4)


def test_unit_vector_normalizes():
    rng = np.random.default_rng(3)
    for _ in range(100):
        raw = rng.normal(size=rng.integers(1, 40))
        if np.linalg.norm(raw) == 0.0:
            continue
        vec = unit_vector(raw)
        assert abs(float(np.linalg.norm(vec)) - 1.0) < 1e-9


def test_unit_vector_is_a_fixed_point():
    # normalizing twice must not change a single bit, or serialized
    # tables would drift on reload
    rng = np.random.default_rng(4)
    for _ in range(100):
        vec = unit_vector(rng.normal(size=16))
        again = unit_vector(vec)
        assert np.array_equal(vec, again)


def test_unit_vector_rejects_bad_input():
    with pytest.raises(ValidationError):
        unit_vector([])
    with pytest.raises(ValidationError):
        unit_vector([0.0, 0.0])
    with pytest.raises(ValidationError):
        unit_vector([1.0, float("inf")])
    with pytest.raises(ValidationError):
        unit_vector([[1.0, 0.0], [0.0, 1.0]])


def test_cosine_similarity_basics():
    a = unit_vector([1.0, 0.0])
    b = unit_vector([0.0, 1.0])
    assert abs(cosine_similarity(a, b)) < 1e-15
    assert abs(cosine_similarity(a, a) - 1.0) < 1e-15
    with pytest.raises(ConfigurationError):
        cosine_similarity(a, unit_vector([1.0, 0.0, 0.0]))


def test_map_to_score_endpoints_and_monotonicity():
    assert map_to_score(-1.0) == 0.0
    assert map_to_score(1.0) == 1.0
    assert map_to_score(0.0) == 0.5
    # clipped outside the nominal range
    assert map_to_score(-1.5) == 0.0
    assert map_to_score(1.5) == 1.0
    rng = np.random.default_rng(9)
    for _ in range(200):
        lo, hi = sorted(rng.uniform(-1.2, 1.2, size=2))
        assert map_to_score(lo) <= map_to_score(hi)


def test_map_to_score_agrees_with_direct_formula():
    rng = np.random.default_rng(10)
    for _ in range(200):
        s = float(rng.uniform(-1.0, 1.0))
        assert abs(map_to_score(s) - (s + 1.0) / 2.0) < 1e-15
