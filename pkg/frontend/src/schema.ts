/** Wire schema shared with the retrieval service (`POST /query`, `GET /health`). */

export const SCHEMA_VERSION = 1;

/** One keypoint triplet: x, y, visibility (0 = unlabeled, 1 = occluded, 2 = visible). */
export type Triplet = [number, number, number];

export interface QueryRequest {
  v: number;
  keypoints: Triplet[];
  bbox?: [number, number, number, number];
  k?: number;
}

export interface QueryResult {
  id: string;
  distance: number;
}

export interface QueryResponse {
  v: number;
  results: QueryResult[];
}

export interface ServiceError {
  v: number;
  error: string;
}

export interface HealthResponse {
  rows: number;
  dim: number;
  version: number;
  checksum: string;
}

/**
 * Validate a request against the service schema before sending.
 * Returns null when valid, else a human-readable reason.
 */
export function validateQueryRequest(req: QueryRequest): string | null {
  if (req.v !== SCHEMA_VERSION) return `unsupported schema version ${req.v}`;
  if (req.keypoints.length !== 17 && req.keypoints.length !== 25) {
    return `keypoints must have 17 or 25 triplets, got ${req.keypoints.length}`;
  }
  for (const t of req.keypoints) {
    if (t.length !== 3 || t.some((v) => !Number.isFinite(v))) {
      return "each keypoint must be a finite [x, y, v] triplet";
    }
    if (t[2] !== 0 && t[2] !== 1 && t[2] !== 2) {
      return `visibility must be 0, 1 or 2, got ${t[2]}`;
    }
  }
  if (req.keypoints.some((t) => t[2] === 0)) return "incomplete skeleton";
  if (req.bbox !== undefined) {
    if (req.bbox.length !== 4 || req.bbox.some((v) => !Number.isFinite(v))) {
      return "bbox must be [x, y, w, h]";
    }
    if (req.bbox[2] <= 0 || req.bbox[3] <= 0) return "degenerate bbox";
  }
  if (req.k !== undefined && (!Number.isInteger(req.k) || req.k < 1)) {
    return `k must be a positive integer, got ${req.k}`;
  }
  return null;
}

export function isQueryResponse(data: unknown): data is QueryResponse {
  const d = data as QueryResponse;
  return (
    typeof d === "object" &&
    d !== null &&
    Array.isArray(d.results) &&
    d.results.every(
      (r) => typeof r.id === "string" && typeof r.distance === "number",
    )
  );
}
