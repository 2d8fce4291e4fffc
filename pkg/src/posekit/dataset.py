"""COCO-style keypoint annotation I/O, grayscale masks and split assignment."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .metrics import EvalPair
from .skeleton import (
    NUM_COCO_KEYPOINTS,
    NUM_KEYPOINTS,
    BoundingBox,
    Skeleton,
    derive_midpoints,
)

ANNOTATED = "annotated"
DERIVED = "derived"


class DatasetFormatError(ValueError):
    """Raised when a document cannot be parsed at all; names the location."""

    def __init__(self, message: str, location: str):
        super().__init__(f"{location}: {message}")
        self.location = location


@dataclass
class AnnotationRecord:
    """One character instance: skeleton, box, optional tags, per-keypoint provenance."""

    image_id: int | str
    skeleton: Skeleton
    bbox: BoundingBox
    file_name: Optional[str] = None
    tags: tuple[str, ...] = ()
    provenance: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.skeleton.num_keypoints != NUM_KEYPOINTS:
            raise ValueError("records carry 25-keypoint skeletons after load")
        if not self.provenance:
            self.provenance = (ANNOTATED,) * NUM_KEYPOINTS
        if len(self.provenance) != NUM_KEYPOINTS:
            raise ValueError(f"provenance must cover {NUM_KEYPOINTS} keypoints")

    @property
    def derived_indices(self) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.provenance) if p == DERIVED)


@dataclass
class RejectedRecord:
    location: str
    reason: str


@dataclass
class LoadResult:
    records: list[AnnotationRecord]
    rejected: list[RejectedRecord] = field(default_factory=list)


def load_coco_keypoints(source: str | Path | dict) -> LoadResult:
    """Load a COCO keypoint document into validated records.

    17-point annotations are upgraded to 25 points via midpoint derivation,
    with the upgraded slots marked as derived.  Malformed annotations are
    collected into the rejection report with a reason; a document that
    cannot be parsed at all raises DatasetFormatError.

    A directory source loads every *.json file inside it in lexicographic
    order, concatenating records and prefixing rejection locations with the
    file name.
    """
    if not isinstance(source, dict) and Path(source).is_dir():
        return _load_directory(Path(source))
    doc = _parse_document(source)
    if not isinstance(doc.get("annotations"), list):
        raise DatasetFormatError("missing 'annotations' list", _location_of(source))
    file_names: dict = {}
    for image in doc.get("images", []):
        if isinstance(image, dict) and "id" in image:
            file_names[image["id"]] = image.get("file_name")

    result = LoadResult(records=[])
    for i, ann in enumerate(doc["annotations"]):
        location = f"annotations[{i}]"
        if isinstance(ann, dict) and "id" in ann:
            location = f"annotation id {ann['id']}"
        try:
            result.records.append(_parse_annotation(ann, file_names))
        except (ValueError, TypeError, KeyError) as exc:
            result.rejected.append(RejectedRecord(location, str(exc)))
    return result


def _load_directory(directory: Path) -> LoadResult:
    paths = sorted(directory.glob("*.json"))
    if not paths:
        raise DatasetFormatError("directory holds no *.json documents", str(directory))
    merged = LoadResult(records=[])
    for path in paths:
        result = load_coco_keypoints(path)
        merged.records.extend(result.records)
        merged.rejected.extend(
            RejectedRecord(f"{path.name}: {r.location}", r.reason) for r in result.rejected
        )
    return merged


def _parse_annotation(ann: dict, file_names: dict) -> AnnotationRecord:
    if not isinstance(ann, dict):
        raise ValueError("annotation is not an object")
    if "image_id" not in ann:
        raise ValueError("missing image_id")
    flat = ann.get("keypoints")
    if not isinstance(flat, list):
        raise ValueError("missing keypoints array")
    if len(flat) not in (3 * NUM_COCO_KEYPOINTS, 3 * NUM_KEYPOINTS):
        raise ValueError(
            f"keypoints array has {len(flat)} numbers, expected "
            f"{3 * NUM_COCO_KEYPOINTS} or {3 * NUM_KEYPOINTS}"
        )
    values = [float(v) for v in flat]
    if any(not math.isfinite(v) for v in values):
        raise ValueError("keypoints contain non-finite values")
    skeleton = Skeleton.from_flat(values)

    bbox_raw = ann.get("bbox")
    if not isinstance(bbox_raw, list) or len(bbox_raw) != 4:
        raise ValueError("missing bbox [x, y, w, h]")
    x, y, w, h = (float(v) for v in bbox_raw)
    if not (w > 0 and h > 0):
        raise ValueError("degenerate bbox")
    bbox = BoundingBox(x, y, w, h)

    if skeleton.num_keypoints == NUM_COCO_KEYPOINTS:
        skeleton = derive_midpoints(skeleton)
        provenance = (ANNOTATED,) * NUM_COCO_KEYPOINTS + (DERIVED,) * 8
    else:
        derived = set(ann.get("derived_keypoints", []))
        provenance = tuple(
            DERIVED if i in derived else ANNOTATED for i in range(NUM_KEYPOINTS)
        )
    tags = tuple(str(t) for t in ann.get("tags", []))
    return AnnotationRecord(
        image_id=ann["image_id"],
        skeleton=skeleton,
        bbox=bbox,
        file_name=file_names.get(ann["image_id"]),
        tags=tags,
        provenance=provenance,
    )


def write_coco_keypoints(
    records: Sequence[AnnotationRecord],
    destination: Optional[str | Path] = None,
) -> dict:
    """Emit a COCO keypoint document; reload reproduces the records.

    Skeletons serialize with all 25 keypoints; derived slots are recorded in
    a derived_keypoints field so reloading keeps provenance without
    re-deriving midpoints.
    """
    images: dict = {}
    annotations = []
    for i, rec in enumerate(records):
        if rec.image_id not in images:
            entry = {"id": rec.image_id}
            if rec.file_name is not None:
                entry["file_name"] = rec.file_name
            images[rec.image_id] = entry
        ann = {
            "id": i + 1,
            "image_id": rec.image_id,
            "keypoints": _flatten_keypoints(rec.skeleton),
            "num_keypoints": int(np.sum(rec.skeleton.labeled)),
            "bbox": [rec.bbox.x, rec.bbox.y, rec.bbox.w, rec.bbox.h],
        }
        if rec.tags:
            ann["tags"] = list(rec.tags)
        if rec.derived_indices:
            ann["derived_keypoints"] = list(rec.derived_indices)
        annotations.append(ann)
    doc = {
        "images": list(images.values()),
        "annotations": annotations,
        "categories": [
            {"id": 1, "name": "character", "keypoints": list(range(NUM_KEYPOINTS))}
        ],
    }
    if destination is not None:
        Path(destination).write_text(json.dumps(doc))
    return doc


def _flatten_keypoints(s: Skeleton) -> list[float]:
    out: list[float] = []
    for x, y, v in s.pts:
        out.extend([float(x), float(y), int(v)])
    return out


def load_mask(path: str | Path) -> np.ndarray:
    """Load a single-channel 8/16-bit grayscale image scaled to [0, 1]."""
    with Image.open(path) as img:
        if img.mode == "L":
            return np.asarray(img, dtype=np.float64) / 255.0
        if img.mode in ("I", "I;16"):
            return np.asarray(img, dtype=np.float64) / 65535.0
        raise ValueError(f"mask must be single-channel grayscale, got mode {img.mode!r}")


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    ids: tuple


SPLIT_NAMES = ("train", "val", "test")


def split_assign(
    record_ids: Sequence,
    ratios: Sequence[float],
    seed: int,
) -> tuple[DatasetSplit, DatasetSplit, DatasetSplit]:
    """Deterministically partition ids into train/val/test.

    Ratios are either fractions summing to 1 (sizes by largest remainder) or
    exact integer counts summing to len(record_ids).  The same seed always
    produces the same partition.
    """
    if len(ratios) != len(SPLIT_NAMES):
        raise ValueError(f"expected {len(SPLIT_NAMES)} ratios, got {len(ratios)}")
    n = len(record_ids)
    if all(float(r).is_integer() for r in ratios) and sum(ratios) == n and n > 0:
        sizes = [int(r) for r in ratios]
    elif math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        exact = [n * r for r in ratios]
        sizes = [int(e) for e in exact]
        remainders = sorted(
            range(len(ratios)), key=lambda i: (exact[i] - sizes[i], -i), reverse=True
        )
        for i in range(n - sum(sizes)):
            sizes[remainders[i]] += 1
    else:
        raise ValueError("ratios must sum to 1 or be counts summing to len(record_ids)")

    order = np.random.default_rng(seed).permutation(n)
    shuffled = [record_ids[i] for i in order]
    splits = []
    start = 0
    for name, size in zip(SPLIT_NAMES, sizes):
        splits.append(DatasetSplit(name, tuple(shuffled[start:start + size])))
        start += size
    return tuple(splits)


def match_pairs(
    gt_records: Sequence[AnnotationRecord],
    pred_records: Sequence[AnnotationRecord],
) -> tuple[list[EvalPair], list, list]:
    """Pair ground truth with predictions by image_id; the gt box is kept.

    Returns the pairs plus the image ids present on only one side.
    """
    preds = {rec.image_id: rec for rec in pred_records}
    gts = {rec.image_id: rec for rec in gt_records}
    if len(preds) != len(pred_records):
        raise ValueError("duplicate image_id among predictions")
    if len(gts) != len(gt_records):
        raise ValueError("duplicate image_id among ground truth")
    pairs = []
    unmatched_gt = []
    for rec in gt_records:
        pred = preds.get(rec.image_id)
        if pred is None:
            unmatched_gt.append(rec.image_id)
            continue
        pairs.append(EvalPair(gt=rec.skeleton, pred=pred.skeleton, bbox=rec.bbox))
    unmatched_pred = [i for i in preds if i not in gts]
    return pairs, unmatched_gt, unmatched_pred


def _parse_document(source: str | Path | dict) -> dict:
    if isinstance(source, dict):
        return source
    path = Path(source)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            str(path),
        ) from exc


def _location_of(source: str | Path | dict) -> str:
    return "<document>" if isinstance(source, dict) else str(source)
