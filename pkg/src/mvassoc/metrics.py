"""Evaluation metrics: average precision, FPR at high recall, and the
image-pair association accuracy family (IPAA-X), with angle-binned reporting.

AP and FPR gauge instance-pair confidence ranking; IPAA gauges whole image
pairs.  An image pair's accuracy is the fraction of objects present in
either view whose association (including "correctly left unmatched") agrees
with ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .association import AssociationResult
from .scene import SceneView

IPAA_LEVELS = (100, 90, 80)


@dataclass(frozen=True)
class ScoredPair:
    """One candidate cross-view pair: confidence in [0, 1] plus whether the
    two boxes really are the same object."""

    confidence: float
    is_positive: bool

    def __post_init__(self) -> None:
        if not np.isfinite(self.confidence) or not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class PairAdjacency:
    """Object-level association statement for one view pair.

    ``universe`` holds every instance_id present in either view.  The maps
    send an object to its asserted partner, or None for "unmatched".  Maps
    are involutive (a -> b implies b -> a).

    One box matching cannot always be summarized by such a map: when an
    object visible in both views gets a different partner through each of
    its two boxes, no single-valued assignment exists.  Those objects are
    listed in ``conflicted``; they always count as incorrectly associated,
    and the involution requirement is waived for entries touching them.
    """

    universe: frozenset[int]
    predicted: Mapping[int, int | None]
    truth: Mapping[int, int | None]
    conflicted: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "universe", frozenset(self.universe))
        object.__setattr__(self, "predicted", dict(self.predicted))
        object.__setattr__(self, "truth", dict(self.truth))
        object.__setattr__(self, "conflicted", frozenset(self.conflicted))
        for name, mapping in (("predicted", self.predicted), ("truth", self.truth)):
            if not set(mapping) <= self.universe:
                raise ValueError(f"{name} map mentions ids outside the universe")
            skip = self.conflicted if name == "predicted" else frozenset()
            for a, b in mapping.items():
                if b is None or a in skip or b in skip:
                    continue
                if b not in self.universe:
                    raise ValueError(f"{name} map targets unknown id {b}")
                if mapping.get(b) != a:
                    raise ValueError(
                        f"{name} map is not involutive: {a} -> {b} but {b} -> "
                        f"{mapping.get(b)}"
                    )
        if not self.conflicted <= self.universe:
            raise ValueError("conflicted ids must belong to the universe")


@dataclass(frozen=True)
class AngleBin:
    """Metrics for view pairs whose camera angle difference falls in
    [lo, hi) degrees (the last bin includes 180)."""

    lo: float
    hi: float
    pair_count: int
    ipaa: Mapping[int, float]
    ap: float | None = None
    fpr95: float | None = None


@dataclass(frozen=True)
class MetricsReport:
    ap: float
    fpr95: float
    ipaa: Mapping[int, float]
    angle_bins: tuple[AngleBin, ...] = ()
    ap_per_pair_mean: float | None = None
    pair_count: int = 0
    scored_count: int = 0


@dataclass(frozen=True)
class ViewPairRecord:
    """Everything the reporters need about one evaluated view pair."""

    scene_id: str
    cameras: tuple[int, int]
    angle_deg: float
    adjacency: PairAdjacency
    scored: tuple[ScoredPair, ...] = ()
    n_matches: int = 0


def confidence_from_distance(scaled_distance: float) -> float:
    """Confidence of a match given its distance scaled into [0, 1]."""
    if not np.isfinite(scaled_distance) or not 0.0 <= scaled_distance <= 1.0:
        raise ValueError(f"scaled distance must be in [0, 1], got {scaled_distance}")
    return 1.0 - scaled_distance


def _split(pairs: Sequence[ScoredPair]) -> tuple[np.ndarray, np.ndarray]:
    conf = np.array([p.confidence for p in pairs], dtype=np.float64)
    pos = np.array([p.is_positive for p in pairs], dtype=bool)
    return conf, pos


def average_precision(pairs: Sequence[ScoredPair]) -> float:
    """Area under the precision-recall curve over descending confidence.

    Uses the all-points method: the mean of precision measured at each
    positive.  Confidence ties keep input order (stable sort).  Raises
    ValueError when there are no positives.
    """
    conf, pos = _split(pairs)
    if not pos.any():
        raise ValueError("average precision needs at least one positive pair")
    order = np.argsort(-conf, kind="stable")
    ranked = pos[order]
    cum_tp = np.cumsum(ranked)
    precision_at = cum_tp / (np.arange(ranked.size) + 1)
    return float(precision_at[ranked].mean())


def fpr_at_recall(pairs: Sequence[ScoredPair], recall_target: float = 0.95) -> float:
    """False positive rate at the first threshold reaching the recall target.

    Thresholds sweep the distinct confidences in descending order; a pair is
    predicted positive when its confidence is >= the threshold.  Raises
    ValueError when either class is empty or the target is outside (0, 1].
    """
    if not 0.0 < recall_target <= 1.0:
        raise ValueError(f"recall target must be in (0, 1], got {recall_target}")
    conf, pos = _split(pairs)
    n_pos = int(pos.sum())
    n_neg = int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("fpr_at_recall needs both positive and negative pairs")
    for t in np.unique(conf)[::-1]:
        predicted = conf >= t
        recall = (predicted & pos).sum() / n_pos
        if recall >= recall_target:
            fp = int((predicted & ~pos).sum())
            return fp / n_neg
    return 1.0  # every pair predicted positive reaches recall 1, so unreachable


def adjacency_from_matching(
    ids_a: Sequence[int],
    ids_b: Sequence[int],
    matched_pairs: Iterable[tuple[int, int]],
) -> PairAdjacency:
    """Project a box-index matching onto object identities.

    ``ids_a`` and ``ids_b`` are each view's instance_ids in list order;
    ``matched_pairs`` holds (index_a, index_b) for the accepted matches.
    Ground truth is implied by shared ids: an object co-visible in both
    views must match itself, anything else must stay unmatched.

    An object whose two boxes disagree about its partner lands in
    ``conflicted`` (it can never be counted correct).
    """
    set_a, set_b = set(ids_a), set(ids_b)
    universe = set_a | set_b
    truth = {o: (o if (o in set_a and o in set_b) else None) for o in universe}

    partner_via_a: dict[int, int | None] = {o: None for o in set_a}
    partner_via_b: dict[int, int | None] = {o: None for o in set_b}
    for ia, ib in matched_pairs:
        partner_via_a[ids_a[ia]] = ids_b[ib]
        partner_via_b[ids_b[ib]] = ids_a[ia]

    predicted: dict[int, int | None] = {}
    conflicted: set[int] = set()
    for o in universe:
        sides = []
        if o in partner_via_a:
            sides.append(partner_via_a[o])
        if o in partner_via_b:
            sides.append(partner_via_b[o])
        if len(sides) == 2 and sides[0] != sides[1]:
            conflicted.add(o)
        predicted[o] = sides[0]
    return PairAdjacency(
        universe=frozenset(universe),
        predicted=predicted,
        truth=truth,
        conflicted=frozenset(conflicted),
    )


def adjacency_from_result(
    view_a: SceneView, view_b: SceneView, result: AssociationResult
) -> PairAdjacency:
    return adjacency_from_matching(
        view_a.instance_ids(), view_b.instance_ids(), result.matched_index_pairs()
    )


def pair_fraction_correct(adj: PairAdjacency) -> float:
    """Fraction of the universe associated exactly as in ground truth,
    counting correctly-unmatched objects as correct."""
    if not adj.universe:
        return 1.0
    correct = sum(
        1
        for o in adj.universe
        if o not in adj.conflicted and adj.predicted.get(o) == adj.truth.get(o)
    )
    return correct / len(adj.universe)


def ipaa(adjacencies: Sequence[PairAdjacency], x: int) -> float:
    """Fraction of image pairs with at least x percent of objects associated
    correctly (inclusive comparison)."""
    if not 0 < x <= 100:
        raise ValueError(f"IPAA level must be in (0, 100], got {x}")
    if not adjacencies:
        raise ValueError("IPAA needs at least one image pair")
    hits = sum(1 for adj in adjacencies if pair_fraction_correct(adj) >= x / 100.0)
    return hits / len(adjacencies)


def _ipaa_from_fractions(fractions: Sequence[float], levels: Sequence[int]) -> dict[int, float]:
    return {
        x: sum(1 for f in fractions if f >= x / 100.0) / len(fractions) for x in levels
    }


def angle_binned_report(
    records: Sequence[ViewPairRecord],
    bin_width: float = 15.0,
    ipaa_levels: Sequence[int] = IPAA_LEVELS,
) -> MetricsReport:
    """Aggregate per-pair records into overall and per-angle-bin metrics.

    Bins partition [0, 180] degrees.  Bin-level AP/FPR are omitted (None)
    when a bin lacks positives or negatives; overall AP pools every scored
    pair, with the per-pair-average variant reported alongside.
    """
    if not records:
        raise ValueError("report needs at least one view pair")
    if bin_width <= 0:
        raise ValueError("bin width must be positive")

    all_scored = [p for rec in records for p in rec.scored]
    fractions = [pair_fraction_correct(rec.adjacency) for rec in records]
    overall_ipaa = _ipaa_from_fractions(fractions, ipaa_levels)

    ap = average_precision(all_scored)
    fpr95 = fpr_at_recall(all_scored)
    per_pair_aps = []
    for rec in records:
        if any(p.is_positive for p in rec.scored):
            per_pair_aps.append(average_precision(rec.scored))
    ap_mean = float(np.mean(per_pair_aps)) if per_pair_aps else None

    n_bins = int(np.ceil(180.0 / bin_width))
    bins = []
    for b in range(n_bins):
        lo, hi = b * bin_width, min((b + 1) * bin_width, 180.0)
        members = [
            rec
            for rec in records
            if min(int(rec.angle_deg // bin_width), n_bins - 1) == b
        ]
        bin_fracs = [pair_fraction_correct(rec.adjacency) for rec in members]
        bin_scored = [p for rec in members for p in rec.scored]
        bin_ap = bin_fpr = None
        has_pos = any(p.is_positive for p in bin_scored)
        has_neg = any(not p.is_positive for p in bin_scored)
        if has_pos:
            bin_ap = average_precision(bin_scored)
        if has_pos and has_neg:
            bin_fpr = fpr_at_recall(bin_scored)
        bins.append(
            AngleBin(
                lo=lo,
                hi=hi,
                pair_count=len(members),
                ipaa=_ipaa_from_fractions(bin_fracs, ipaa_levels) if members else {},
                ap=bin_ap,
                fpr95=bin_fpr,
            )
        )
    return MetricsReport(
        ap=ap,
        fpr95=fpr95,
        ipaa=overall_ipaa,
        angle_bins=tuple(bins),
        ap_per_pair_mean=ap_mean,
        pair_count=len(records),
        scored_count=len(all_scored),
    )


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "ap": report.ap,
        "fpr95": report.fpr95,
        "ipaa": {str(k): v for k, v in report.ipaa.items()},
        "ap_per_pair_mean": report.ap_per_pair_mean,
        "pair_count": report.pair_count,
        "scored_count": report.scored_count,
        "angle_bins": [
            {
                "lo_deg": b.lo,
                "hi_deg": b.hi,
                "pairs": b.pair_count,
                "ipaa": {str(k): v for k, v in b.ipaa.items()},
                "ap": b.ap,
                "fpr95": b.fpr95,
            }
            for b in report.angle_bins
        ],
    }


def report_csv_rows(report: MetricsReport, ipaa_levels: Sequence[int] = IPAA_LEVELS) -> list[list]:
    """Flat rows for plotting: a header, one row per angle bin, one summary row."""
    header = ["row_type", "bin_lo_deg", "bin_hi_deg", "pairs", "ap", "fpr95"] + [
        f"ipaa_{x}" for x in ipaa_levels
    ]
    rows = [header]
    for b in report.angle_bins:
        rows.append(
            ["bin", b.lo, b.hi, b.pair_count, b.ap, b.fpr95]
            + [b.ipaa.get(x) for x in ipaa_levels]
        )
    rows.append(
        ["summary", 0.0, 180.0, report.pair_count, report.ap, report.fpr95]
        + [report.ipaa.get(x) for x in ipaa_levels]
    )
    return rows
