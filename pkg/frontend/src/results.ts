/** Result panel: ranked neighbors with thumbnails or stick-figure fallbacks. */

import type { QueryResult, Triplet } from "./schema.js";
import type { PoseLibrary } from "./presets.js";

export interface ResultEntry {
  id: string;
  /** Distance exactly as returned by the service; never recomputed. */
  distance: number;
  /** Resolved thumbnail URL, or null when no mapping exists. */
  thumbnailUrl: string | null;
  /** Skeleton to overlay / load as the next query, when known. */
  skeleton: Triplet[] | null;
  bbox: [number, number, number, number] | null;
}

export interface ResultPanelOptions {
  /** Maps an id to an image URL, e.g. "https://cdn.example/{id}.jpg". */
  thumbnailTemplate?: string;
  library?: PoseLibrary;
}

export class ResultPanelState {
  readonly entries: ResultEntry[];

  constructor(results: QueryResult[], options: ResultPanelOptions = {}) {
    for (let i = 1; i < results.length; i++) {
      if (results[i].distance < results[i - 1].distance) {
        throw new Error("service results must arrive sorted ascending by distance");
      }
    }
    this.entries = results.map((r) => {
      const record = options.library?.get(r.id);
      return {
        id: r.id,
        distance: r.distance,
        thumbnailUrl: options.thumbnailTemplate
          ? options.thumbnailTemplate.replaceAll("{id}", encodeURIComponent(r.id))
          : null,
        skeleton: record ? record.keypoints : null,
        bbox: record?.bbox ?? null,
      };
    });
  }

  /** The record to load into the editor when a result is clicked. */
  poseForClick(index: number): { imageId: string; keypoints: Triplet[]; bbox?: [number, number, number, number] } | null {
    const entry = this.entries[index];
    if (!entry || !entry.skeleton) return null;
    return {
      imageId: entry.id,
      keypoints: entry.skeleton,
      bbox: entry.bbox ?? undefined,
    };
  }
}
