/** Query client: one in-flight request, stale discard, 300 ms live debounce. */

import type { QueryRequest, QueryResponse, QueryResult } from "./schema.js";
import { isQueryResponse, validateQueryRequest } from "./schema.js";

export interface QueryOutcome {
  /** Sequence number of the request this outcome answers. */
  seq: number;
  results?: QueryResult[];
  /** Service or validation error, surfaced verbatim. */
  error?: string;
  /** True when a newer request superseded this one; the UI ignores it. */
  stale: boolean;
}

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<{ status: number; json(): Promise<unknown> }>;

export const LIVE_QUERY_DEBOUNCE_MS = 300;

export class QueryClient {
  private seq = 0;
  private applied = 0;
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  get lastIssuedSeq(): number {
    return this.seq;
  }

  async health(): Promise<unknown> {
    const resp = await this.fetchImpl(`${this.baseUrl}/health`);
    return resp.json();
  }

  /**
   * Issue a query. The outcome is marked stale when a newer request was
   * issued before this response arrived; stale results must not render.
   */
  async query(request: QueryRequest): Promise<QueryOutcome> {
    const seq = ++this.seq;
    const invalid = validateQueryRequest(request);
    if (invalid) return { seq, error: invalid, stale: this.isStale(seq) };
    try {
      const resp = await this.fetchImpl(`${this.baseUrl}/query`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(request),
      });
      const data = await resp.json();
      const stale = this.isStale(seq);
      if (!stale) this.applied = seq;
      if (resp.status !== 200) {
        const message = (data as { error?: string }).error ?? `service error ${resp.status}`;
        return { seq, error: message, stale };
      }
      if (!isQueryResponse(data)) {
        return { seq, error: "malformed service response", stale };
      }
      return { seq, results: (data as QueryResponse).results, stale };
    } catch (err) {
      return { seq, error: `service unavailable: ${String(err)}`, stale: this.isStale(seq) };
    }
  }

  /**
   * Debounced live-query mode: at most one request per 300 ms of dragging.
   * Only the trailing edit fires.
   */
  queryLive(request: QueryRequest, apply: (outcome: QueryOutcome) => void): void {
    if (this.debounceTimer !== null) clearTimeout(this.debounceTimer);
    this.debounceTimer = setTimeout(() => {
      this.debounceTimer = null;
      void this.query(request).then(apply);
    }, LIVE_QUERY_DEBOUNCE_MS);
  }

  private isStale(seq: number): boolean {
    return seq < this.seq || seq <= this.applied;
  }
}
