import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { LIVE_QUERY_DEBOUNCE_MS, QueryClient, QueryOutcome } from "../src/client.js";
import type { FetchLike, QueryRequest } from "../src/client.js";
import { defaultPose } from "../src/editor.js";

function request(k = 5): QueryRequest {
  return { v: 1, keypoints: defaultPose(), k };
}

/** Fetch stub whose responses resolve only when the test releases them. */
function gatedFetch() {
  const gates: Array<(value: unknown) => void> = [];
  const impl: FetchLike = (_url, init) => {
    const body = JSON.parse(init?.body ?? "{}");
    return new Promise((resolve) => {
      gates.push(() =>
        resolve({
          status: 200,
          json: async () => ({
            v: 1,
            results: [{ id: `answer-k${body.k}`, distance: 0.25 }],
          }),
        }),
      );
    }) as ReturnType<FetchLike>;
  };
  return { impl, gates };
}

describe("QueryClient stale handling", () => {
  it("discards every response superseded by a newer request (rapid drag)", async () => {
    const { impl, gates } = gatedFetch();
    const client = new QueryClient("http://svc", impl);
    // A drag burst: five queries issued back to back, none answered yet.
    const pending = [1, 2, 3, 4, 5].map((k) => client.query(request(k)));
    expect(gates).toHaveLength(5);
    // Answers arrive out of order: oldest last.
    for (const release of [...gates].reverse()) release(undefined);
    const outcomes = await Promise.all(pending);
    expect(outcomes.map((o) => o.stale)).toEqual([true, true, true, true, false]);
    const applied = outcomes.filter((o) => !o.stale);
    expect(applied).toHaveLength(1);
    expect(applied[0].results?.[0].id).toBe("answer-k5");
  });

  it("an older response arriving after a newer applied one stays stale", async () => {
    const { impl, gates } = gatedFetch();
    const client = new QueryClient("http://svc", impl);
    const first = client.query(request(1));
    const second = client.query(request(2));
    gates[1](undefined); // newest answers first and applies
    expect((await second).stale).toBe(false);
    gates[0](undefined); // the old answer must now be discarded
    expect((await first).stale).toBe(true);
  });

  it("sequential awaited queries all apply", async () => {
    const { impl, gates } = gatedFetch();
    const client = new QueryClient("http://svc", impl);
    const p1 = client.query(request(1));
    gates[0](undefined);
    expect((await p1).stale).toBe(false);
    const p2 = client.query(request(2));
    gates[1](undefined);
    expect((await p2).stale).toBe(false);
  });
});

describe("QueryClient responses", () => {
  it("returns distances verbatim, never recomputed", async () => {
    const distances = [0.12345678901234567, 0.5, 0.5000000001];
    const impl: FetchLike = async () => ({
      status: 200,
      json: async () => ({
        v: 1,
        results: distances.map((d, i) => ({ id: `r${i}`, distance: d })),
      }),
    });
    const client = new QueryClient("http://svc", impl);
    const outcome = await client.query(request());
    expect(outcome.results?.map((r) => r.distance)).toEqual(distances);
  });

  it("extending k keeps the result prefix (exact-knn property)", async () => {
    const table = Array.from({ length: 20 }, (_, i) => ({
      id: `p${i}`,
      distance: i * 0.1,
    }));
    const impl: FetchLike = async (_url, init) => {
      const body = JSON.parse(init?.body ?? "{}");
      return {
        status: 200,
        json: async () => ({ v: 1, results: table.slice(0, body.k) }),
      };
    };
    const client = new QueryClient("http://svc", impl);
    const five = await client.query(request(5));
    const ten = await client.query(request(10));
    expect(ten.results?.slice(0, 5)).toEqual(five.results);
  });

  it("surfaces service validation errors verbatim", async () => {
    const impl: FetchLike = async () => ({
      status: 400,
      json: async () => ({ v: 1, error: "incomplete skeleton" }),
    });
    const client = new QueryClient("http://svc", impl);
    const outcome = await client.query(request());
    expect(outcome.error).toBe("incomplete skeleton");
  });

  it("reports unreachable services as an error outcome", async () => {
    const impl: FetchLike = async () => {
      throw new Error("ECONNREFUSED");
    };
    const client = new QueryClient("http://svc", impl);
    const outcome = await client.query(request());
    expect(outcome.error).toMatch(/service unavailable/);
  });

  it("rejects invalid payloads before any network call", async () => {
    let calls = 0;
    const impl: FetchLike = async () => {
      calls++;
      return { status: 200, json: async () => ({ v: 1, results: [] }) };
    };
    const client = new QueryClient("http://svc", impl);
    const bad = request();
    bad.keypoints = bad.keypoints.slice(0, 10);
    const outcome = await client.query(bad);
    expect(outcome.error).toMatch(/17 or 25/);
    expect(calls).toBe(0);
  });
});

describe("QueryClient live mode", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("issues at most one request per 300 ms of dragging", async () => {
    let calls = 0;
    const impl: FetchLike = async () => {
      calls++;
      return { status: 200, json: async () => ({ v: 1, results: [] }) };
    };
    const client = new QueryClient("http://svc", impl);
    const outcomes: QueryOutcome[] = [];
    for (let i = 0; i < 25; i++) {
      client.queryLive(request(i + 1), (o) => outcomes.push(o));
      vi.advanceTimersByTime(20); // drag events every 20 ms
    }
    vi.advanceTimersByTime(LIVE_QUERY_DEBOUNCE_MS);
    await vi.runAllTimersAsync();
    expect(calls).toBe(1);
    expect(outcomes).toHaveLength(1);
  });

  it("fires again for a second burst", async () => {
    let calls = 0;
    const impl: FetchLike = async () => {
      calls++;
      return { status: 200, json: async () => ({ v: 1, results: [] }) };
    };
    const client = new QueryClient("http://svc", impl);
    client.queryLive(request(), () => {});
    await vi.advanceTimersByTimeAsync(LIVE_QUERY_DEBOUNCE_MS + 10);
    client.queryLive(request(), () => {});
    await vi.advanceTimersByTimeAsync(LIVE_QUERY_DEBOUNCE_MS + 10);
    expect(calls).toBe(2);
  });
});
