"""Canonical 25-keypoint taxonomy, skeleton geometry, boxes and crop/flip/rotate ops."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

NUM_COCO_KEYPOINTS = 17
NUM_KEYPOINTS = 25


class KeypointId(IntEnum):
    """Keypoint indices: 0-16 are the COCO-17 points, 17-24 limb midpoints."""

    NOSE = 0
    LEFT_EYE = 1
    RIGHT_EYE = 2
    LEFT_EAR = 3
    RIGHT_EAR = 4
    LEFT_SHOULDER = 5
    RIGHT_SHOULDER = 6
    LEFT_ELBOW = 7
    RIGHT_ELBOW = 8
    LEFT_WRIST = 9
    RIGHT_WRIST = 10
    LEFT_HIP = 11
    RIGHT_HIP = 12
    LEFT_KNEE = 13
    RIGHT_KNEE = 14
    LEFT_ANKLE = 15
    RIGHT_ANKLE = 16
    MID_LEFT_UPPER_ARM = 17
    MID_RIGHT_UPPER_ARM = 18
    MID_LEFT_FOREARM = 19
    MID_RIGHT_FOREARM = 20
    MID_LEFT_THIGH = 21
    MID_RIGHT_THIGH = 22
    MID_LEFT_SHIN = 23
    MID_RIGHT_SHIN = 24


KEYPOINT_NAMES: tuple[str, ...] = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
    "mid_left_upper_arm",
    "mid_right_upper_arm",
    "mid_left_forearm",
    "mid_right_forearm",
    "mid_left_thigh",
    "mid_right_thigh",
    "mid_left_shin",
    "mid_right_shin",
)

# Endpoints defining each auxiliary midpoint (the 8 two-bone appendage segments).
MIDPOINT_ENDPOINTS: dict[int, tuple[int, int]] = {
    KeypointId.MID_LEFT_UPPER_ARM: (KeypointId.LEFT_SHOULDER, KeypointId.LEFT_ELBOW),
    KeypointId.MID_RIGHT_UPPER_ARM: (KeypointId.RIGHT_SHOULDER, KeypointId.RIGHT_ELBOW),
    KeypointId.MID_LEFT_FOREARM: (KeypointId.LEFT_ELBOW, KeypointId.LEFT_WRIST),
    KeypointId.MID_RIGHT_FOREARM: (KeypointId.RIGHT_ELBOW, KeypointId.RIGHT_WRIST),
    KeypointId.MID_LEFT_THIGH: (KeypointId.LEFT_HIP, KeypointId.LEFT_KNEE),
    KeypointId.MID_RIGHT_THIGH: (KeypointId.RIGHT_HIP, KeypointId.RIGHT_KNEE),
    KeypointId.MID_LEFT_SHIN: (KeypointId.LEFT_KNEE, KeypointId.LEFT_ANKLE),
    KeypointId.MID_RIGHT_SHIN: (KeypointId.RIGHT_KNEE, KeypointId.RIGHT_ANKLE),
}

# The same 8 segments, in midpoint-index order; reused by the PCP-style metric.
LIMB_SEGMENTS: tuple[tuple[int, int], ...] = tuple(
    MIDPOINT_ENDPOINTS[i] for i in range(NUM_COCO_KEYPOINTS, NUM_KEYPOINTS)
)

LIMB_NAMES: tuple[str, ...] = (
    "left_upper_arm",
    "right_upper_arm",
    "left_forearm",
    "right_forearm",
    "left_thigh",
    "right_thigh",
    "left_shin",
    "right_shin",
)


def _build_lr_swap() -> np.ndarray:
    swap = np.arange(NUM_KEYPOINTS)
    pairs = [(1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 12), (13, 14), (15, 16),
             (17, 18), (19, 20), (21, 22), (23, 24)]
    for a, b in pairs:
        swap[a], swap[b] = b, a
    return swap


# Self-inverse left/right permutation; fixes exactly the nose.
LR_SWAP: np.ndarray = _build_lr_swap()
LR_SWAP.setflags(write=False)

# Published COCO evaluation falloff constants for the 17 COCO keypoints.
COCO_OKS_KAPPAS: np.ndarray = np.array(
    [0.26, 0.25, 0.25, 0.35, 0.35, 0.79, 0.79, 0.72, 0.72, 0.62, 0.62,
     1.07, 1.07, 0.87, 0.87, 0.89, 0.89]
) / 10.0
COCO_OKS_KAPPAS.setflags(write=False)


class Keypoint(NamedTuple):
    """A single annotated point; when v == 0, x and y carry no meaning."""

    x: float
    y: float
    v: int


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box (x, y = top-left corner); the source of all scale normalizers."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"degenerate bbox: w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def longest_dim(self) -> float:
        return max(self.w, self.h)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def corners(self) -> np.ndarray:
        """The four corner points, counter-clockwise from top-left, shape (4, 2)."""
        return np.array([
            [self.x, self.y],
            [self.x + self.w, self.y],
            [self.x + self.w, self.y + self.h],
            [self.x, self.y + self.h],
        ])


@dataclass
class Skeleton:
    """Keypoint array of shape (17, 3) or (25, 3); columns are x, y, visibility.

    Visibility follows the COCO convention: 0 = not labeled, 1 = labeled but
    occluded, 2 = labeled and visible.  All operations treat skeletons as
    immutable and return new instances.
    """

    pts: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.pts, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"skeleton must have shape (K, 3), got {pts.shape}")
        if pts.shape[0] not in (NUM_COCO_KEYPOINTS, NUM_KEYPOINTS):
            raise ValueError(f"skeleton must have 17 or 25 keypoints, got {pts.shape[0]}")
        self.pts = pts

    @classmethod
    def from_flat(cls, values: list[float]) -> "Skeleton":
        """Build from a flat [x1, y1, v1, x2, y2, v2, ...] triplet list."""
        arr = np.asarray(values, dtype=np.float64)
        if arr.size % 3 != 0:
            raise ValueError(f"flat keypoint list length {arr.size} is not a multiple of 3")
        return cls(arr.reshape(-1, 3))

    def keypoint(self, i: int) -> Keypoint:
        x, y, v = self.pts[i]
        return Keypoint(float(x), float(y), int(v))

    @property
    def coords(self) -> np.ndarray:
        """(K, 2) view of the x/y columns."""
        return self.pts[:, :2]

    @property
    def vis(self) -> np.ndarray:
        """(K,) view of the visibility column."""
        return self.pts[:, 2]

    @property
    def num_keypoints(self) -> int:
        return self.pts.shape[0]

    @property
    def labeled(self) -> np.ndarray:
        """Boolean mask of keypoints with v > 0."""
        return self.pts[:, 2] > 0

    def is_complete(self) -> bool:
        """True when the skeleton has all 25 keypoints labeled."""
        return self.num_keypoints == NUM_KEYPOINTS and bool(np.all(self.labeled))

    def copy(self) -> "Skeleton":
        return Skeleton(self.pts.copy())

    def flat(self) -> list[float]:
        """Flat [x1, y1, v1, ...] list; v is emitted as an integer-valued float."""
        return [float(v) for v in self.pts.reshape(-1)]


@dataclass(frozen=True)
class KeypointSigmas:
    """Per-keypoint falloff constants; midpoint entries average their endpoints."""

    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (NUM_KEYPOINTS,):
            raise ValueError(f"expected {NUM_KEYPOINTS} sigmas, got shape {vals.shape}")
        if not np.all(vals > 0):
            raise ValueError("all sigmas must be strictly positive")
        for mid, (a, b) in MIDPOINT_ENDPOINTS.items():
            expected = (vals[a] + vals[b]) / 2.0
            if not math.isclose(vals[mid], expected, rel_tol=0, abs_tol=1e-9):
                raise ValueError(
                    f"sigma for {KEYPOINT_NAMES[mid]} must equal the mean of its "
                    f"endpoints ({expected!r}), got {vals[mid]!r}"
                )
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_coco17(cls, kappas: np.ndarray) -> "KeypointSigmas":
        """Extend 17 COCO falloffs to 25 by averaging limb-segment endpoints."""
        kappas = np.asarray(kappas, dtype=np.float64)
        if kappas.shape != (NUM_COCO_KEYPOINTS,):
            raise ValueError(f"expected {NUM_COCO_KEYPOINTS} values, got shape {kappas.shape}")
        full = np.empty(NUM_KEYPOINTS)
        full[:NUM_COCO_KEYPOINTS] = kappas
        for mid, (a, b) in MIDPOINT_ENDPOINTS.items():
            full[mid] = (kappas[a] + kappas[b]) / 2.0
        return cls(full)

    @classmethod
    def default(cls) -> "KeypointSigmas":
        """The published COCO evaluation constants plus derived midpoint values."""
        return cls.from_coco17(COCO_OKS_KAPPAS)

    @classmethod
    def load(cls, path: str | Path) -> "KeypointSigmas":
        """Parse a plain-text table of 25 "name kappa" rows in canonical order.

        Rejects missing rows, extra rows, out-of-order names and non-positive
        values.  Lines starting with '#' and blank lines are ignored.
        """
        rows: list[tuple[str, float]] = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'name kappa', got {line!r}")
            try:
                value = float(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: kappa {parts[1]!r} is not a number") from None
            rows.append((parts[0], value))
        if len(rows) != NUM_KEYPOINTS:
            raise ValueError(f"{path}: expected {NUM_KEYPOINTS} rows, got {len(rows)}")
        for i, (name, _) in enumerate(rows):
            if name != KEYPOINT_NAMES[i]:
                raise ValueError(f"{path}: row {i} must be {KEYPOINT_NAMES[i]!r}, got {name!r}")
        return cls(np.array([value for _, value in rows]))

    def dump(self, path: str | Path) -> None:
        """Write the 25-row "name kappa" table read back by load()."""
        lines = [f"{name} {float(value)!r}" for name, value in zip(KEYPOINT_NAMES, self.values)]
        Path(path).write_text("\n".join(lines) + "\n")


def derive_midpoints(s: Skeleton) -> Skeleton:
    """Fill the 8 auxiliary midpoints from the 17 COCO keypoints.

    Each midpoint gets the coordinate average of its limb endpoints and
    visibility min(v_a, v_b); an unlabeled endpoint therefore yields an
    unlabeled midpoint.  Total function: 25-point inputs have their midpoint
    slots recomputed from the current endpoint values.
    """
    out = np.zeros((NUM_KEYPOINTS, 3))
    out[:s.num_keypoints] = s.pts
    for mid, (a, b) in MIDPOINT_ENDPOINTS.items():
        va, vb = out[a, 2], out[b, 2]
        v = min(va, vb)
        if v > 0:
            out[mid, 0] = (out[a, 0] + out[b, 0]) / 2.0
            out[mid, 1] = (out[a, 1] + out[b, 1]) / 2.0
        else:
            out[mid, 0] = 0.0
            out[mid, 1] = 0.0
        out[mid, 2] = v
    return Skeleton(out)


def flip_lr(s: Skeleton, image_width: float) -> Skeleton:
    """Mirror a skeleton horizontally inside an image of the given width.

    Every x becomes image_width - 1 - x (pixel-center convention), then
    left/right keypoints swap slots; the nose keeps its slot.
    """
    if image_width <= 0:
        raise ValueError(f"image_width must be positive, got {image_width}")
    out = s.pts.copy()
    out[:, 0] = (image_width - 1) - out[:, 0]
    swap = LR_SWAP[:s.num_keypoints]
    return Skeleton(out[swap])


def rotate(
    s: Skeleton,
    b: BoundingBox,
    theta: float,
    center: tuple[float, float],
) -> tuple[Skeleton, BoundingBox]:
    """Rigidly rotate keypoints about a center; the box becomes the tight
    axis-aligned box of the rotated original box corners."""
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cx, cy = center

    def rot_xy(xy: np.ndarray) -> np.ndarray:
        dx = xy[:, 0] - cx
        dy = xy[:, 1] - cy
        return np.stack([dx * cos_t - dy * sin_t + cx, dx * sin_t + dy * cos_t + cy], axis=1)

    out = s.pts.copy()
    out[:, :2] = rot_xy(s.pts[:, :2])
    corners = rot_xy(b.corners())
    x0, y0 = corners.min(axis=0)
    x1, y1 = corners.max(axis=0)
    return Skeleton(out), BoundingBox(x0, y0, x1 - x0, y1 - y0)


def bbox_from_mask(mask: np.ndarray, threshold: float = 0.5) -> Optional[BoundingBox]:
    """Tight box over all mask cells >= threshold, or None when none pass.

    The mask is indexed [row, col]; the returned box is in cell units with
    x = column and y = row, and width/height counting whole cells.
    """
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    mask = np.asarray(mask)
    rows, cols = np.nonzero(mask >= threshold)
    if rows.size == 0:
        return None
    y0, y1 = int(rows.min()), int(rows.max())
    x0, x1 = int(cols.min()), int(cols.max())
    return BoundingBox(x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def padded_crop_region(
    b: BoundingBox,
    image_w: float,
    image_h: float,
    pad_frac: float = 0.10,
) -> BoundingBox:
    """Square crop centered on the box, side (1 + 2 * pad_frac) * max(w, h).

    The crop may extend beyond the image bounds; callers pad with a fill
    color.  image_w/image_h describe the source image and never clamp.
    """
    if pad_frac < 0:
        raise ValueError(f"pad_frac must be >= 0, got {pad_frac}")
    side = (1.0 + 2.0 * pad_frac) * b.longest_dim
    cx, cy = b.center
    return BoundingBox(cx - side / 2.0, cy - side / 2.0, side, side)
