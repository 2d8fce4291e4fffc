/** COCO-17 keypoint taxonomy, live midpoint derivation and stick-figure edges. */

import type { Triplet } from "./schema.js";

export const COCO_KEYPOINT_NAMES = [
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
] as const;

export const NUM_COCO = 17;

/** Limb segments whose midpoints form keypoints 17-24, in slot order. */
export const MIDPOINT_SEGMENTS: ReadonlyArray<[number, number]> = [
  [5, 7],   // mid_left_upper_arm
  [6, 8],   // mid_right_upper_arm
  [7, 9],   // mid_left_forearm
  [8, 10],  // mid_right_forearm
  [11, 13], // mid_left_thigh
  [12, 14], // mid_right_thigh
  [13, 15], // mid_left_shin
  [14, 16], // mid_right_shin
];

/** Bone rendering edges over the 17 COCO keypoints. */
export const SKELETON_EDGES: ReadonlyArray<[number, number]> = [
  [0, 1], [0, 2], [1, 3], [2, 4],
  [5, 6], [5, 7], [7, 9], [6, 8], [8, 10],
  [5, 11], [6, 12], [11, 12],
  [11, 13], [13, 15], [12, 14], [14, 16],
];

/**
 * Derive the 8 read-only midpoints from 17 editable keypoints.
 * A midpoint is labeled only when both endpoints are; visibility is the
 * minimum of the endpoints'.
 */
export function deriveMidpoints(coco: Triplet[]): Triplet[] {
  if (coco.length !== NUM_COCO) {
    throw new Error(`expected ${NUM_COCO} keypoints, got ${coco.length}`);
  }
  return MIDPOINT_SEGMENTS.map(([a, b]) => {
    const v = Math.min(coco[a][2], coco[b][2]);
    if (v <= 0) return [0, 0, 0] as Triplet;
    return [(coco[a][0] + coco[b][0]) / 2, (coco[a][1] + coco[b][1]) / 2, v] as Triplet;
  });
}

/** Tight axis-aligned box over labeled keypoints, or null when none. */
export function tightBbox(
  keypoints: Triplet[],
): [number, number, number, number] | null {
  const labeled = keypoints.filter((t) => t[2] > 0);
  if (labeled.length === 0) return null;
  const xs = labeled.map((t) => t[0]);
  const ys = labeled.map((t) => t[1]);
  const x0 = Math.min(...xs);
  const y0 = Math.min(...ys);
  const w = Math.max(...xs) - x0;
  const h = Math.max(...ys) - y0;
  if (w <= 0 || h <= 0) return null;
  return [x0, y0, w, h];
}

export interface StickFigure {
  /** Bone segments as [x1, y1, x2, y2], only between labeled endpoints. */
  bones: Array<[number, number, number, number]>;
  /** Labeled joint positions. */
  joints: Array<[number, number]>;
}

/** Geometry for rendering a skeleton, usable on any canvas. */
export function stickFigure(keypoints: Triplet[]): StickFigure {
  const bones: Array<[number, number, number, number]> = [];
  for (const [a, b] of SKELETON_EDGES) {
    if (keypoints[a][2] > 0 && keypoints[b][2] > 0) {
      bones.push([keypoints[a][0], keypoints[a][1], keypoints[b][0], keypoints[b][1]]);
    }
  }
  const joints = keypoints
    .filter((t) => t[2] > 0)
    .map((t) => [t[0], t[1]] as [number, number]);
  return { bones, joints };
}
