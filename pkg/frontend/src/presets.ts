/** Pose preset documents: the same COCO keypoint schema the toolkit reads. */

import type { Triplet } from "./schema.js";

export interface PoseRecord {
  imageId: string;
  keypoints: Triplet[]; // 17 or 25 triplets
  bbox?: [number, number, number, number];
}

interface CocoAnnotation {
  image_id: number | string;
  keypoints: number[];
  bbox?: number[];
}

interface CocoDocument {
  annotations: CocoAnnotation[];
}

function toTriplets(flat: number[]): Triplet[] {
  if (flat.length % 3 !== 0 || (flat.length !== 51 && flat.length !== 75)) {
    throw new Error(`keypoints array must hold 17 or 25 triplets, got ${flat.length} numbers`);
  }
  const out: Triplet[] = [];
  for (let i = 0; i < flat.length; i += 3) {
    out.push([flat[i], flat[i + 1], flat[i + 2]]);
  }
  return out;
}

/** Parse a COCO keypoint document (or a bare {keypoints, bbox} preset). */
export function parsePoseDocument(doc: unknown): PoseRecord[] {
  const d = doc as CocoDocument & { keypoints?: unknown; bbox?: number[] };
  if (Array.isArray(d.annotations)) {
    return d.annotations.map((ann) => ({
      imageId: String(ann.image_id),
      keypoints: toTriplets(ann.keypoints),
      bbox:
        ann.bbox && ann.bbox.length === 4
          ? (ann.bbox as [number, number, number, number])
          : undefined,
    }));
  }
  if (Array.isArray(d.keypoints)) {
    const flat = (d.keypoints as number[][]).flat();
    return [
      {
        imageId: "preset",
        keypoints: toTriplets(flat),
        bbox: d.bbox && d.bbox.length === 4 ? (d.bbox as [number, number, number, number]) : undefined,
      },
    ];
  }
  throw new Error("expected a COCO document or a bare keypoints preset");
}

/** Skeletons by id, used to overlay results and to load a result as a query. */
export class PoseLibrary {
  private byId = new Map<string, PoseRecord>();

  constructor(records: PoseRecord[] = []) {
    for (const rec of records) this.byId.set(rec.imageId, rec);
  }

  static fromDocument(doc: unknown): PoseLibrary {
    return new PoseLibrary(parsePoseDocument(doc));
  }

  get(id: string): PoseRecord | undefined {
    return this.byId.get(id);
  }

  get size(): number {
    return this.byId.size;
  }
}
