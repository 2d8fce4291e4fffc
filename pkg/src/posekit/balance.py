"""Inverse square-root frequency reweighing and the weighted multi-label BCE loss."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Predictions are clamped to [EPS, 1 - EPS] before any log.
EPS = 1e-7


@dataclass(frozen=True)
class ClassFrequencyTable:
    """Positive-sample counts per class out of a fixed dataset of N samples."""

    total: int
    positives: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self) -> None:
        positives = np.asarray(self.positives, dtype=np.int64)
        if self.total <= 0:
            raise ValueError(f"total sample count must be positive, got {self.total}")
        if positives.ndim != 1 or positives.size == 0:
            raise ValueError("positives must be a non-empty 1D array")
        if len(self.names) != positives.size:
            raise ValueError(
                f"{len(self.names)} names for {positives.size} classes"
            )
        bad = np.nonzero((positives <= 0) | (positives >= self.total))[0]
        if bad.size:
            raise ValueError(
                f"class {self.names[bad[0]]!r} has unusable count "
                f"{positives[bad[0]]} (must satisfy 0 < N_i < {self.total})"
            )
        object.__setattr__(self, "positives", positives)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def num_classes(self) -> int:
        return self.positives.size

    @property
    def frequencies(self) -> np.ndarray:
        return self.positives / self.total

    @classmethod
    def load(cls, path: str | Path) -> "ClassFrequencyTable":
        """Parse "class_name,N_i" rows headed by a "TOTAL,N" row."""
        lines = [
            line.strip()
            for line in Path(path).read_text().splitlines()
            if line.strip() and not line.strip().startswith("#")
        ]
        if not lines:
            raise ValueError(f"{path}: empty frequency table")
        header = lines[0].split(",")
        if len(header) != 2 or header[0] != "TOTAL":
            raise ValueError(f"{path}: first row must be 'TOTAL,N', got {lines[0]!r}")
        total = int(header[1])
        names: list[str] = []
        counts: list[int] = []
        for lineno, line in enumerate(lines[1:], start=2):
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'class_name,N_i', got {line!r}")
            names.append(parts[0])
            counts.append(int(parts[1]))
        return cls(total, np.array(counts, dtype=np.int64), tuple(names))

    def dump(self, path: str | Path) -> None:
        lines = [f"TOTAL,{self.total}"]
        lines += [f"{name},{count}" for name, count in zip(self.names, self.positives)]
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class ClassWeights:
    """Per-class positive rates r_i = sqrt(N_i) / (sqrt(N_i) + sqrt(N - N_i))."""

    r: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.r, dtype=np.float64)
        if r.ndim != 1 or not np.all((r > 0) & (r < 1)):
            raise ValueError("all r_i must lie strictly inside (0, 1)")
        object.__setattr__(self, "r", r)

    @property
    def num_classes(self) -> int:
        return self.r.size


def compute_r(t: ClassFrequencyTable) -> ClassWeights:
    """Square-root-frequency positive rates; monotone increasing in N_i."""
    sqrt_pos = np.sqrt(t.positives.astype(np.float64))
    sqrt_neg = np.sqrt((t.total - t.positives).astype(np.float64))
    return ClassWeights(sqrt_pos / (sqrt_pos + sqrt_neg))


def weight(z: float | np.ndarray, r_i: float | np.ndarray) -> float | np.ndarray:
    """Per-class weight 0.5 * (z / r_i + (1 - z) / (1 - r_i)).

    Averages to exactly 1 over z ~ Bernoulli(r_i), so reweighing preserves
    the expected loss magnitude while boosting rare positives.
    """
    return 0.5 * (z / r_i + (1.0 - z) / (1.0 - r_i))


def weighted_bce(y: np.ndarray, yhat: np.ndarray, w: ClassWeights) -> float:
    """Mean over classes of weight(y_i) * BCE(y_i, yhat_i), natural log.

    Predictions are clamped to [EPS, 1 - EPS] before the logs.
    """
    y, yhat = _check_lengths(y, yhat, w)
    p = np.clip(yhat, EPS, 1.0 - EPS)
    bce = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(np.mean(weight(y, w.r) * bce))


def weighted_bce_grad(y: np.ndarray, yhat: np.ndarray, w: ClassWeights) -> np.ndarray:
    """Analytic gradient of weighted_bce with respect to yhat.

    Zero where the clamp is active, matching the piecewise-constant loss there.
    """
    y, yhat = _check_lengths(y, yhat, w)
    p = np.clip(yhat, EPS, 1.0 - EPS)
    grad = weight(y, w.r) * (-(y / p) + (1.0 - y) / (1.0 - p)) / y.size
    grad[(yhat < EPS) | (yhat > 1.0 - EPS)] = 0.0
    return grad


def expected_per_batch(frequency: float | np.ndarray, batch: int) -> float | np.ndarray:
    """Expected positive occurrences per batch for a class of given frequency."""
    if batch <= 0:
        raise ValueError(f"batch size must be positive, got {batch}")
    return frequency * batch


def expected_positives_per_batch(t: ClassFrequencyTable, batch: int) -> np.ndarray:
    """Per-class batch * N_i / N."""
    if batch <= 0:
        raise ValueError(f"batch size must be positive, got {batch}")
    return batch * t.positives / t.total


def _check_lengths(
    y: np.ndarray, yhat: np.ndarray, w: ClassWeights
) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.shape != (w.num_classes,):
        raise ValueError(
            f"shape mismatch: y {y.shape}, yhat {yhat.shape}, weights ({w.num_classes},)"
        )
    return y, yhat
