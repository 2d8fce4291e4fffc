"""Keypoint evaluation suite: OKS@t, PCKh, PDJ, PCPm and per-keypoint breakdowns.

All metrics evaluate the 17 COCO keypoints; auxiliary midpoints are
supervision-side constructs and never scored.  Ground-truth keypoints with
v = 0 are excluded everywhere; a labeled ground-truth keypoint whose
prediction is unlabeled counts as infinitely wrong.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .skeleton import (
    LIMB_NAMES,
    LIMB_SEGMENTS,
    NUM_COCO_KEYPOINTS,
    BoundingBox,
    KeypointId,
    KeypointSigmas,
    Skeleton,
)

REPORT_VERSION = 1

# Table layout: left/right keypoints pool into one row per body part.
KEYPOINT_GROUPS: tuple[tuple[str, tuple[int, ...]], ...] = (
    ("nose", (KeypointId.NOSE,)),
    ("eyes", (KeypointId.LEFT_EYE, KeypointId.RIGHT_EYE)),
    ("ears", (KeypointId.LEFT_EAR, KeypointId.RIGHT_EAR)),
    ("shoulders", (KeypointId.LEFT_SHOULDER, KeypointId.RIGHT_SHOULDER)),
    ("elbows", (KeypointId.LEFT_ELBOW, KeypointId.RIGHT_ELBOW)),
    ("wrists", (KeypointId.LEFT_WRIST, KeypointId.RIGHT_WRIST)),
    ("hips", (KeypointId.LEFT_HIP, KeypointId.RIGHT_HIP)),
    ("knees", (KeypointId.LEFT_KNEE, KeypointId.RIGHT_KNEE)),
    ("ankles", (KeypointId.LEFT_ANKLE, KeypointId.RIGHT_ANKLE)),
)


@dataclass(frozen=True)
class EvalPair:
    """A ground-truth/prediction skeleton pair with the ground-truth box."""

    gt: Skeleton
    pred: Skeleton
    bbox: BoundingBox

    def __post_init__(self) -> None:
        if self.gt.num_keypoints != self.pred.num_keypoints:
            raise ValueError(
                f"gt has {self.gt.num_keypoints} keypoints, pred {self.pred.num_keypoints}"
            )
        if not np.any(self.gt.labeled[:NUM_COCO_KEYPOINTS]):
            raise ValueError("pair has no labeled ground-truth keypoint")


@dataclass(frozen=True)
class MetricValue:
    """A threshold metric together with the counts behind it.

    skipped counts instances (PCKh/PDJ) or limbs (PCPm) left out because
    their normalizer or endpoints were indeterminate; they are reported,
    never silently dropped.
    """

    value: float
    correct: int
    evaluated: int
    skipped: int

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "correct": self.correct,
            "evaluated": self.evaluated,
            "skipped": self.skipped,
        }


def _errors(pair: EvalPair) -> np.ndarray:
    """Per-keypoint euclidean error over the COCO-17 slots; inf where the
    prediction is unlabeled."""
    gt = pair.gt.pts[:NUM_COCO_KEYPOINTS]
    pred = pair.pred.pts[:NUM_COCO_KEYPOINTS]
    err = np.hypot(gt[:, 0] - pred[:, 0], gt[:, 1] - pred[:, 1])
    err[pred[:, 2] <= 0] = np.inf
    return err


def oks_terms(pair: EvalPair, sig: KeypointSigmas) -> np.ndarray:
    """Per-keypoint similarity exp(-d^2 / (2 s^2 kappa^2)) with s^2 = box area.

    Returns NaN for unlabeled ground-truth keypoints, 0.0 where only the
    prediction is missing.
    """
    err = _errors(pair)
    kappa = sig.values[:NUM_COCO_KEYPOINTS]
    with np.errstate(over="ignore"):
        terms = np.exp(-(err**2) / (2.0 * pair.bbox.area * kappa**2))
    terms[np.isinf(err)] = 0.0
    terms[~pair.gt.labeled[:NUM_COCO_KEYPOINTS]] = np.nan
    return terms


def oks(pair: EvalPair, sig: KeypointSigmas) -> float:
    """Mean keypoint similarity over labeled ground-truth keypoints."""
    terms = oks_terms(pair, sig)
    labeled = ~np.isnan(terms)
    if not labeled.any():
        raise ValueError("oks undefined: no labeled ground-truth keypoint")
    return math.fsum(terms[labeled]) / int(labeled.sum())


def oks_at(pairs: Sequence[EvalPair], sig: KeypointSigmas, t: float) -> float:
    """Fraction of pairs whose per-instance OKS reaches the threshold."""
    if not pairs:
        raise ValueError("oks_at requires at least one pair")
    if not 0 < t < 1:
        raise ValueError(f"threshold must be in (0, 1), got {t}")
    hits = sum(1 for pair in pairs if oks(pair, sig) >= t)
    return hits / len(pairs)


def head_size_from_ears(pair: EvalPair) -> Optional[float]:
    """Default PCKh normalizer: twice the ear-to-ear distance, or None."""
    left = pair.gt.keypoint(KeypointId.LEFT_EAR)
    right = pair.gt.keypoint(KeypointId.RIGHT_EAR)
    if left.v <= 0 or right.v <= 0:
        return None
    return 2.0 * math.hypot(left.x - right.x, left.y - right.y)


def pckh_at(
    pairs: Sequence[EvalPair],
    alpha: float = 0.5,
    head_size: Callable[[EvalPair], Optional[float]] = head_size_from_ears,
) -> MetricValue:
    """Fraction of labeled keypoints with error <= alpha * head size.

    Instances whose head size is indeterminate are skipped and tallied.
    """
    correct = evaluated = skipped = 0
    for pair in pairs:
        head = head_size(pair)
        if head is None or head <= 0:
            skipped += 1
            continue
        err = _errors(pair)
        labeled = pair.gt.labeled[:NUM_COCO_KEYPOINTS]
        evaluated += int(labeled.sum())
        correct += int(np.sum(err[labeled] <= alpha * head))
    return MetricValue(_ratio(correct, evaluated), correct, evaluated, skipped)


def torso_diameter(pair: EvalPair) -> Optional[float]:
    """Default PDJ normalizer: left-shoulder to right-hip distance, or None."""
    shoulder = pair.gt.keypoint(KeypointId.LEFT_SHOULDER)
    hip = pair.gt.keypoint(KeypointId.RIGHT_HIP)
    if shoulder.v <= 0 or hip.v <= 0:
        return None
    return math.hypot(shoulder.x - hip.x, shoulder.y - hip.y)


def bbox_diagonal(pair: EvalPair) -> Optional[float]:
    """Alternative PDJ normalizer: the ground-truth box diagonal."""
    return math.hypot(pair.bbox.w, pair.bbox.h)


def pdj_at(
    pairs: Sequence[EvalPair],
    frac: float = 0.20,
    normalizer: Callable[[EvalPair], Optional[float]] = torso_diameter,
) -> MetricValue:
    """Fraction of labeled keypoints with error <= frac * torso diameter."""
    correct = evaluated = skipped = 0
    for pair in pairs:
        norm = normalizer(pair)
        if norm is None or norm <= 0:
            skipped += 1
            continue
        err = _errors(pair)
        labeled = pair.gt.labeled[:NUM_COCO_KEYPOINTS]
        evaluated += int(labeled.sum())
        correct += int(np.sum(err[labeled] <= frac * norm))
    return MetricValue(_ratio(correct, evaluated), correct, evaluated, skipped)


def mean_limb_lengths(
    pairs: Sequence[EvalPair],
    segments: Sequence[tuple[int, int]] = LIMB_SEGMENTS,
) -> list[Optional[float]]:
    """Mean ground-truth length per segment over instances labeling both ends."""
    means: list[Optional[float]] = []
    for a, b in segments:
        lengths = [
            math.hypot(
                pair.gt.pts[a, 0] - pair.gt.pts[b, 0],
                pair.gt.pts[a, 1] - pair.gt.pts[b, 1],
            )
            for pair in pairs
            if pair.gt.pts[a, 2] > 0 and pair.gt.pts[b, 2] > 0
        ]
        means.append(math.fsum(lengths) / len(lengths) if lengths else None)
    return means


def pcpm_at(
    pairs: Sequence[EvalPair],
    alpha: float = 0.5,
    segments: Sequence[tuple[int, int]] = LIMB_SEGMENTS,
) -> MetricValue:
    """Fraction of limbs with both endpoint errors <= alpha * mean limb length.

    The threshold for each limb uses the mean ground-truth length of that
    limb over the whole evaluation set.  Limbs with an unlabeled
    ground-truth endpoint are skipped and tallied.
    """
    per_limb, skipped = _pcpm_cells(pairs, alpha, segments)
    correct = sum(cell.correct for cell in per_limb)
    evaluated = sum(cell.evaluated for cell in per_limb)
    return MetricValue(_ratio(correct, evaluated), correct, evaluated, skipped)


def _pcpm_cells(
    pairs: Sequence[EvalPair],
    alpha: float,
    segments: Sequence[tuple[int, int]],
) -> tuple[list[MetricValue], int]:
    means = mean_limb_lengths(pairs, segments)
    cells: list[MetricValue] = []
    skipped_total = 0
    for (a, b), mean_len in zip(segments, means):
        correct = evaluated = skipped = 0
        for pair in pairs:
            if pair.gt.pts[a, 2] <= 0 or pair.gt.pts[b, 2] <= 0:
                skipped += 1
                continue
            err = _errors(pair)
            evaluated += 1
            if err[a] <= alpha * mean_len and err[b] <= alpha * mean_len:
                correct += 1
        cells.append(MetricValue(_ratio(correct, evaluated), correct, evaluated, skipped))
        skipped_total += skipped
    return cells, skipped_total


@dataclass
class MetricReport:
    """Aggregates, per-keypoint and per-limb breakdowns, skip tallies, config.

    Breakdown cells are keypoint-level counts, so pooling the cells of all
    groups reproduces the keypoint-level aggregates exactly.  The OKS@t
    aggregates are instance-level (one decision per pair); their
    keypoint-level counterparts live in keypoint_level.
    """

    num_pairs: int
    aggregates: dict[str, float]
    pckh: MetricValue
    pdj: MetricValue
    pcpm: MetricValue
    keypoint_level: dict[str, MetricValue]
    per_keypoint: dict[str, dict[str, MetricValue]]
    per_limb: dict[str, MetricValue]
    per_instance_oks: list[float]
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "v": REPORT_VERSION,
            "num_pairs": self.num_pairs,
            "aggregates": dict(self.aggregates),
            "pckh": self.pckh.to_dict(),
            "pdj": self.pdj.to_dict(),
            "pcpm": self.pcpm.to_dict(),
            "keypoint_level": {k: v.to_dict() for k, v in self.keypoint_level.items()},
            "per_keypoint": {
                group: {metric: cell.to_dict() for metric, cell in cells.items()}
                for group, cells in self.per_keypoint.items()
            },
            "per_limb": {name: cell.to_dict() for name, cell in self.per_limb.items()},
            "per_instance_oks": list(self.per_instance_oks),
            "config": dict(self.config),
        }


def keypoint_breakdown(
    pairs: Sequence[EvalPair],
    sig: KeypointSigmas,
    oks_thresholds: tuple[float, float] = (0.5, 0.75),
    pckh_alpha: float = 0.5,
    pdj_frac: float = 0.20,
    pcpm_alpha: float = 0.5,
    head_size: Callable[[EvalPair], Optional[float]] = head_size_from_ears,
    pdj_normalizer: Callable[[EvalPair], Optional[float]] = torso_diameter,
) -> MetricReport:
    """Evaluate all metrics with per-keypoint-group and per-limb breakdowns."""
    if not pairs:
        raise ValueError("keypoint_breakdown requires at least one pair")

    t_lo, t_hi = oks_thresholds
    # Per-keypoint tallies pooled over instances, indexed by COCO keypoint.
    oks_hits = {t: np.zeros(NUM_COCO_KEYPOINTS, dtype=np.int64) for t in oks_thresholds}
    oks_counts = np.zeros(NUM_COCO_KEYPOINTS, dtype=np.int64)
    pckh_hits = np.zeros(NUM_COCO_KEYPOINTS, dtype=np.int64)
    pckh_counts = np.zeros(NUM_COCO_KEYPOINTS, dtype=np.int64)
    pdj_hits = np.zeros(NUM_COCO_KEYPOINTS, dtype=np.int64)
    pdj_counts = np.zeros(NUM_COCO_KEYPOINTS, dtype=np.int64)
    pckh_skipped = pdj_skipped = 0
    per_instance_oks: list[float] = []

    for pair in pairs:
        labeled = pair.gt.labeled[:NUM_COCO_KEYPOINTS]
        terms = oks_terms(pair, sig)
        per_instance_oks.append(math.fsum(terms[labeled]) / int(labeled.sum()))
        oks_counts += labeled
        for t in oks_thresholds:
            oks_hits[t] += labeled & (np.nan_to_num(terms, nan=-1.0) >= t)

        err = _errors(pair)
        head = head_size(pair)
        if head is None or head <= 0:
            pckh_skipped += 1
        else:
            pckh_counts += labeled
            pckh_hits += labeled & (err <= pckh_alpha * head)
        norm = pdj_normalizer(pair)
        if norm is None or norm <= 0:
            pdj_skipped += 1
        else:
            pdj_counts += labeled
            pdj_hits += labeled & (err <= pdj_frac * norm)

    def cell(hits: np.ndarray, counts: np.ndarray, idx: tuple[int, ...], skipped: int = 0) -> MetricValue:
        correct = int(hits[list(idx)].sum())
        evaluated = int(counts[list(idx)].sum())
        return MetricValue(_ratio(correct, evaluated), correct, evaluated, skipped)

    all_idx = tuple(range(NUM_COCO_KEYPOINTS))
    per_keypoint: dict[str, dict[str, MetricValue]] = {}
    for group, idx in KEYPOINT_GROUPS:
        per_keypoint[group] = {
            f"oks@{_pct(t_lo)}": cell(oks_hits[t_lo], oks_counts, idx),
            f"oks@{_pct(t_hi)}": cell(oks_hits[t_hi], oks_counts, idx),
            f"pckh@{_pct(pckh_alpha)}": cell(pckh_hits, pckh_counts, idx),
            f"pdj@{_pct(pdj_frac)}": cell(pdj_hits, pdj_counts, idx),
        }
    keypoint_level = {
        f"oks@{_pct(t_lo)}": cell(oks_hits[t_lo], oks_counts, all_idx),
        f"oks@{_pct(t_hi)}": cell(oks_hits[t_hi], oks_counts, all_idx),
        f"pckh@{_pct(pckh_alpha)}": cell(pckh_hits, pckh_counts, all_idx, pckh_skipped),
        f"pdj@{_pct(pdj_frac)}": cell(pdj_hits, pdj_counts, all_idx, pdj_skipped),
    }

    pcpm_cells, _ = _pcpm_cells(pairs, pcpm_alpha, LIMB_SEGMENTS)
    per_limb = dict(zip(LIMB_NAMES, pcpm_cells))
    pcpm = pcpm_at(pairs, pcpm_alpha)

    aggregates = {
        f"oks@{_pct(t_lo)}": sum(1 for v in per_instance_oks if v >= t_lo) / len(pairs),
        f"oks@{_pct(t_hi)}": sum(1 for v in per_instance_oks if v >= t_hi) / len(pairs),
        f"pckh@{_pct(pckh_alpha)}": keypoint_level[f"pckh@{_pct(pckh_alpha)}"].value,
        f"pdj@{_pct(pdj_frac)}": keypoint_level[f"pdj@{_pct(pdj_frac)}"].value,
        f"pcpm@{_pct(pcpm_alpha)}": pcpm.value,
    }

    config = {
        "oks_thresholds": list(oks_thresholds),
        "pckh_alpha": pckh_alpha,
        "pckh_head_size": getattr(head_size, "__name__", str(head_size)),
        "pdj_frac": pdj_frac,
        "pdj_normalizer": getattr(pdj_normalizer, "__name__", str(pdj_normalizer)),
        "pcpm_alpha": pcpm_alpha,
        "sigmas": [float(v) for v in sig.values],
    }

    return MetricReport(
        num_pairs=len(pairs),
        aggregates=aggregates,
        pckh=keypoint_level[f"pckh@{_pct(pckh_alpha)}"],
        pdj=keypoint_level[f"pdj@{_pct(pdj_frac)}"],
        pcpm=pcpm,
        keypoint_level=keypoint_level,
        per_keypoint=per_keypoint,
        per_limb=per_limb,
        per_instance_oks=per_instance_oks,
        config=config,
    )


def _ratio(correct: int, evaluated: int) -> float:
    return correct / evaluated if evaluated else 0.0


def _pct(t: float) -> int:
    return int(round(t * 100))
