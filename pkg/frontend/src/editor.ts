/** Editor state: 17 draggable keypoints, live midpoints, bbox handles, k. */

import type { QueryRequest, Triplet } from "./schema.js";
import { SCHEMA_VERSION, validateQueryRequest } from "./schema.js";
import { NUM_COCO, deriveMidpoints, tightBbox } from "./skeleton.js";
import type { PoseRecord } from "./presets.js";

/** A relaxed default standing pose on a 256x256 canvas. */
export function defaultPose(): Triplet[] {
  const pts: Array<[number, number]> = [
    [128, 40],            // nose
    [120, 32], [136, 32], // eyes
    [112, 36], [144, 36], // ears
    [100, 72], [156, 72], // shoulders
    [92, 112], [164, 112], // elbows
    [88, 150], [168, 150], // wrists
    [108, 140], [148, 140], // hips
    [106, 184], [150, 184], // knees
    [104, 228], [152, 228], // ankles
  ];
  return pts.map(([x, y]) => [x, y, 2] as Triplet);
}

export class EditorState {
  /** The 17 editable COCO keypoints. */
  keypoints: Triplet[];
  /** Explicit box handles; null means "use the tight box over keypoints". */
  bbox: [number, number, number, number] | null = null;
  k = 5;

  constructor(keypoints: Triplet[] = defaultPose()) {
    if (keypoints.length !== NUM_COCO) {
      throw new Error(`editor holds ${NUM_COCO} keypoints, got ${keypoints.length}`);
    }
    this.keypoints = keypoints.map((t) => [...t] as Triplet);
  }

  /** The 8 derived midpoints; always the live endpoint midpoints. */
  get midpoints(): Triplet[] {
    return deriveMidpoints(this.keypoints);
  }

  /** All 25 points for rendering: editable first, derived after. */
  get fullSkeleton(): Triplet[] {
    return [...this.keypoints, ...this.midpoints];
  }

  dragTo(index: number, x: number, y: number): void {
    if (index < 0 || index >= NUM_COCO) {
      throw new Error(`only the ${NUM_COCO} COCO keypoints are draggable`);
    }
    this.keypoints[index] = [x, y, this.keypoints[index][2]];
  }

  toggleVisibility(index: number): void {
    const v = this.keypoints[index][2];
    this.keypoints[index][2] = v > 0 ? 0 : 2;
  }

  /** Reason query submission is disabled, or null when ready. */
  get blockedReason(): string | null {
    return validateQueryRequest(this.toPayload());
  }

  get canQuery(): boolean {
    return this.blockedReason === null;
  }

  /** Load a preset or result pose; editor keeps only the 17 editable points. */
  loadPose(record: PoseRecord): void {
    this.keypoints = record.keypoints
      .slice(0, NUM_COCO)
      .map((t) => [...t] as Triplet);
    this.bbox = record.bbox ? [...record.bbox] : null;
  }

  /** The validated wire payload; bbox falls back to the tight box. */
  toPayload(): QueryRequest {
    const payload: QueryRequest = {
      v: SCHEMA_VERSION,
      keypoints: this.keypoints.map((t) => [...t] as Triplet),
      k: this.k,
    };
    const box = this.bbox ?? tightBbox(this.keypoints) ?? undefined;
    if (box) payload.bbox = [...box] as [number, number, number, number];
    return payload;
  }
}
