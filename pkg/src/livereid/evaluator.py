"""Open-set evaluation: finding rate, true validation rate, F1*, and the
area under the trade-off curve, swept over the alert threshold.

A metric point with a zero denominator is undefined; undefined points
stay on the curve (flagged as None) but are excluded from F1* and from
the area computation. All rates here are pooled over (query, chunk)
pairs; per-query averaged variants are provided separately.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from livereid.core import EvaluationError, iou
from livereid.ingest import GroundTruth
from livereid.reid import AlertOutcome, QueryChunkRanking, RankedCandidate, decide_alert

MATCH_IOU = 0.5


@dataclass(frozen=True)
class EvalPoint:
    """Finding rate and true validation rate at one threshold; None = undefined."""

    beta: float
    fr: float | None
    tvr: float | None

    @property
    def f1(self) -> float | None:
        if self.fr is None or self.tvr is None:
            return None
        return f1(self.fr, self.tvr)


@dataclass(frozen=True)
class EvalCurve:
    points: tuple[EvalPoint, ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise EvaluationError("a curve needs at least one point")
        betas = [p.beta for p in self.points]
        if any(b <= a for a, b in zip(betas, betas[1:])):
            raise EvaluationError("curve betas must be strictly increasing")

    def defined_points(self) -> list[EvalPoint]:
        return [p for p in self.points if p.fr is not None and p.tvr is not None]


@dataclass(frozen=True)
class RunSummary:
    """Headline numbers of one evaluated run."""

    f1_star: float | None
    beta_star: float | None
    map_score: float | None
    fr_at_star: float | None
    tvr_at_star: float | None
    gallery_sizes: tuple[int, ...]
    similarity_ops: int


def candidate_matches_query(
    candidate: RankedCandidate, ground_truth: GroundTruth, query_identity: str
) -> bool:
    """True when the candidate box covers the query's ground-truth box
    on that frame of that video with IoU >= 0.5."""
    det = candidate.gallery_image.detection
    gt_box = ground_truth.box_for(det.video_id, det.frame, query_identity)
    return gt_box is not None and iou(det.box, gt_box) >= MATCH_IOU


def _outcome_hit(outcome: AlertOutcome, ground_truth: GroundTruth, identity: str) -> bool:
    return any(
        candidate_matches_query(c, ground_truth, identity) for c in outcome.candidates
    )


def compute_fr(
    outcomes: Sequence[AlertOutcome],
    ground_truth: GroundTruth,
    identity_of: Mapping[str, str],
) -> float | None:
    """Finding rate at one threshold.

    Of the (query, chunk) pairs whose query identity appears in the
    chunk's ground truth, the fraction where an alert was raised and a
    presented candidate matches the query. None when no pair qualifies.
    """
    present = 0
    found = 0
    for outcome in outcomes:
        identity = identity_of[outcome.query_id]
        chunk = outcome.chunk
        if not ground_truth.identity_present(
            chunk.video_id, chunk.start_frame, chunk.end_frame, identity
        ):
            continue
        present += 1
        if outcome.raised and _outcome_hit(outcome, ground_truth, identity):
            found += 1
    if present == 0:
        return None
    return found / present


def compute_tvr(
    outcomes: Sequence[AlertOutcome],
    ground_truth: GroundTruth,
    identity_of: Mapping[str, str],
) -> float | None:
    """True validation rate at one threshold.

    Of all raised alerts, the fraction whose presented candidates
    include a match for the query. None when no alert was raised.
    """
    raised = 0
    valid = 0
    for outcome in outcomes:
        if not outcome.raised:
            continue
        raised += 1
        if _outcome_hit(outcome, ground_truth, identity_of[outcome.query_id]):
            valid += 1
    if raised == 0:
        return None
    return valid / raised


def f1(fr: float, tvr: float) -> float:
    """Harmonic mean of the two rates; 0 when both are 0."""
    if fr == 0.0 and tvr == 0.0:
        return 0.0
    return 2.0 * fr * tvr / (fr + tvr)


def build_curve(
    rankings: Sequence[QueryChunkRanking],
    beta_grid: Sequence[float],
    eta: int,
    ground_truth: GroundTruth,
    identity_of: Mapping[str, str],
) -> EvalCurve:
    """Evaluate the stored rankings at every threshold of the grid."""
    points = []
    for beta in beta_grid:
        outcomes = [
            decide_alert(r.query_id, r.chunk, r.candidates, beta, eta)
            for r in rankings
        ]
        points.append(
            EvalPoint(
                beta=beta,
                fr=compute_fr(outcomes, ground_truth, identity_of),
                tvr=compute_tvr(outcomes, ground_truth, identity_of),
            )
        )
    return EvalCurve(points=tuple(points))


def f1_star(curve: EvalCurve) -> tuple[float, float]:
    """Best F1 over the curve and the smallest beta attaining it."""
    best: tuple[float, float] | None = None
    for point in curve.points:
        value = point.f1
        if value is None:
            continue
        if best is None or value > best[0]:
            best = (value, point.beta)
    if best is None:
        raise EvaluationError("every point of the curve is undefined")
    return best


def map_area(curve: EvalCurve) -> float:
    """Area under the TVR-over-FR trade-off.

    Defined points are sorted by FR; TVR values at duplicate FR are
    averaged; the curve is extended to FR = 0 at the first TVR value;
    the area is the trapezoidal integral. Input order does not matter.
    """
    defined = sorted(
        ((p.fr, p.tvr) for p in curve.points if p.fr is not None and p.tvr is not None),
        key=lambda q: q[0],
    )
    if not defined:
        raise EvaluationError("every point of the curve is undefined")
    xs: list[float] = []
    ys: list[float] = []
    i = 0
    while i < len(defined):
        j = i
        while j < len(defined) and defined[j][0] == defined[i][0]:
            j += 1
        xs.append(defined[i][0])
        ys.append(sum(q[1] for q in defined[i:j]) / (j - i))
        i = j
    xs.insert(0, 0.0)
    ys.insert(0, ys[0])
    return sum(
        (xs[k + 1] - xs[k]) * (ys[k + 1] + ys[k]) / 2.0 for k in range(len(xs) - 1)
    )


def summarize(
    curve: EvalCurve,
    *,
    gallery_sizes: Sequence[int] = (),
    similarity_ops: int = 0,
) -> RunSummary:
    """Fold a curve into its headline numbers; None when nothing is defined."""
    try:
        best_f1, best_beta = f1_star(curve)
        area = map_area(curve)
    except EvaluationError:
        return RunSummary(
            f1_star=None,
            beta_star=None,
            map_score=None,
            fr_at_star=None,
            tvr_at_star=None,
            gallery_sizes=tuple(gallery_sizes),
            similarity_ops=similarity_ops,
        )
    at_star = next(p for p in curve.points if p.beta == best_beta)
    return RunSummary(
        f1_star=best_f1,
        beta_star=best_beta,
        map_score=area,
        fr_at_star=at_star.fr,
        tvr_at_star=at_star.tvr,
        gallery_sizes=tuple(gallery_sizes),
        similarity_ops=similarity_ops,
    )


def per_query_metrics(
    rankings: Sequence[QueryChunkRanking],
    beta_grid: Sequence[float],
    eta: int,
    ground_truth: GroundTruth,
    identity_of: Mapping[str, str],
) -> dict:
    """Per-query curves folded to F1* and area, plus their means.

    Queries whose curve is entirely undefined are reported as None and
    left out of the means. Returns a JSON-friendly dict.
    """
    order: list[str] = []
    for r in rankings:
        if r.query_id not in order:
            order.append(r.query_id)
    queries: dict[str, dict | None] = {}
    f1_values: list[float] = []
    map_values: list[float] = []
    for query_id in order:
        own = [r for r in rankings if r.query_id == query_id]
        curve = build_curve(own, beta_grid, eta, ground_truth, identity_of)
        try:
            best_f1, best_beta = f1_star(curve)
            area = map_area(curve)
        except EvaluationError:
            queries[query_id] = None
            continue
        queries[query_id] = {"f1_star": best_f1, "beta_star": best_beta, "map": area}
        f1_values.append(best_f1)
        map_values.append(area)
    return {
        "queries": queries,
        "mean_f1_star": sum(f1_values) / len(f1_values) if f1_values else None,
        "mean_map": sum(map_values) / len(map_values) if map_values else None,
    }
