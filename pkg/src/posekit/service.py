"""Long-running pose query service over a read-only descriptor index."""
from __future__ import annotations

import json
import math
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .descriptor import IncompleteSkeletonError, PoseIndex, descriptor, knn, load_index
from .skeleton import (
    NUM_COCO_KEYPOINTS,
    NUM_KEYPOINTS,
    BoundingBox,
    Skeleton,
    derive_midpoints,
)

SCHEMA_VERSION = 1


@dataclass
class ServiceConfig:
    """Service settings; loaded once at startup from a JSON file."""

    index_path: str
    host: str = "127.0.0.1"
    port: int = 8080
    default_k: int = 5
    max_k: int = 100
    smoothing_sigma: float = 1.0
    sigma_path: Optional[str] = None
    denylist_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.default_k < 1:
            raise ValueError(f"default_k must be >= 1, got {self.default_k}")
        if self.max_k < self.default_k:
            raise ValueError("max_k must be >= default_k")
        if self.smoothing_sigma <= 0:
            raise ValueError("smoothing_sigma must be positive")

    @classmethod
    def load(cls, path: str | Path) -> "ServiceConfig":
        raw = json.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "index_path" not in raw:
            raise ValueError("config must set index_path")
        return cls(**raw)


class QueryPayload(BaseModel):
    v: int = SCHEMA_VERSION
    keypoints: list[list[float]]
    bbox: Optional[list[float]] = None
    k: Optional[int] = None


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"v": SCHEMA_VERSION, "error": message})


def _load_denylist(path: Optional[str]) -> frozenset[str]:
    if path is None:
        return frozenset()
    lines = Path(path).read_text().splitlines()
    return frozenset(line.strip() for line in lines if line.strip())


def create_app(config: ServiceConfig) -> FastAPI:
    """Build the service app; the index is loaded once and shared read-only."""
    try:
        index: PoseIndex = load_index(config.index_path)
    except (OSError, ValueError) as exc:
        raise RuntimeError(f"cannot start: index {config.index_path!r}: {exc}") from exc
    denylist = _load_denylist(config.denylist_path)
    checksum_at_load = index.checksum()

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        if index.checksum() != checksum_at_load:
            raise RuntimeError("index mutated while serving")

    app = FastAPI(title="posekit retrieval service", lifespan=lifespan)
    app.state.index = index
    app.state.config = config
    app.state.checksum = checksum_at_load

    @app.get("/health")
    def health() -> dict:
        return {
            "rows": len(index),
            "dim": index.dim,
            "version": SCHEMA_VERSION,
            "checksum": checksum_at_load,
        }

    @app.post("/query")
    def query(payload: QueryPayload):
        k = payload.k if payload.k is not None else config.default_k
        if k < 1:
            return _error(400, f"k must be >= 1, got {k}")
        if k > config.max_k:
            return _error(400, f"k exceeds the configured limit of {config.max_k}")
        if len(payload.keypoints) not in (NUM_COCO_KEYPOINTS, NUM_KEYPOINTS):
            return _error(
                400,
                f"keypoints must have {NUM_COCO_KEYPOINTS} or {NUM_KEYPOINTS} "
                f"triplets, got {len(payload.keypoints)}",
            )
        if any(len(t) != 3 for t in payload.keypoints):
            return _error(400, "each keypoint must be an [x, y, v] triplet")
        if any(not math.isfinite(v) for t in payload.keypoints for v in t):
            return _error(400, "keypoints must be finite numbers")

        skel = Skeleton([t for t in payload.keypoints])
        if skel.num_keypoints == NUM_COCO_KEYPOINTS:
            skel = derive_midpoints(skel)
        box = None
        if payload.bbox is not None:
            if len(payload.bbox) != 4:
                return _error(400, "bbox must be [x, y, w, h]")
            try:
                box = BoundingBox(*payload.bbox)
            except ValueError as exc:
                return _error(400, str(exc))
        try:
            q = descriptor(skel, box)
        except IncompleteSkeletonError:
            return _error(400, "incomplete skeleton")
        except ValueError as exc:
            return _error(400, str(exc))

        fetch = k + len(denylist) if denylist else k
        results = [r for r in knn(index, q, fetch) if r.id not in denylist][:k]
        return {
            "v": SCHEMA_VERSION,
            "results": [{"id": r.id, "distance": r.distance} for r in results],
        }

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
