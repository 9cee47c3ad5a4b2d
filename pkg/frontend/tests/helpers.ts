/** Canned payloads and a recording fetch stub shared by the tests. */

import type { QueueItem } from "../src/api.js";

export const DEFAULT_WEIGHTS = [0.25, 0.25, 0.2, 0.15, 0.15];

export function cannedItem(overrides: Partial<QueueItem> = {}): QueueItem {
  const scores = [0.95, 0.95, 0.95, 0.95, 0.95];
  return {
    item_id: 0,
    question: "股东能否查阅公司会计账簿",
    answer: "根据《公司法》第三十三条，股东有权查阅会计账簿。",
    cause: "《公司法》第三十三条",
    source: {
      kind: "ensemble",
      winner_model: "m1",
      final_score: 0.95,
      dimension_scores: scores,
      weights: [...DEFAULT_WEIGHTS],
    },
    created_at: "2024-05-01T08:00:00+00:00",
    status: { state: "pending" },
    ...overrides,
  };
}

export function threeItems(): QueueItem[] {
  return [
    cannedItem(),
    cannedItem({ item_id: 1, question: "试用期最长可以约定多久", cause: "" }),
    cannedItem({ item_id: 2, question: "离婚后子女抚养权如何确定" }),
  ];
}

export interface RecordedCall {
  method: string;
  url: string;
  body: unknown;
}

type Responder = (call: RecordedCall) => Response | Promise<Response>;

/** Routes requests to registered responders and records every call. */
export class StubFetch {
  readonly calls: RecordedCall[] = [];
  private readonly routes: { method: string; path: RegExp; respond: Responder }[] = [];

  on(method: string, path: RegExp, respond: Responder): this {
    this.routes.push({ method, path, respond });
    return this;
  }

  callsTo(method: string, path: RegExp): RecordedCall[] {
    return this.calls.filter((call) => call.method === method && path.test(call.url));
  }

  get fetch(): typeof fetch {
    return async (input, init) => {
      const url = typeof input === "string" ? input : input instanceof URL ? input.href : input.url;
      const method = init?.method ?? "GET";
      const body = typeof init?.body === "string" ? JSON.parse(init.body) : undefined;
      const call: RecordedCall = { method, url, body };
      this.calls.push(call);
      for (const route of this.routes) {
        if (route.method === method && route.path.test(url)) {
          return route.respond(call);
        }
      }
      throw new Error(`unstubbed request: ${method} ${url}`);
    };
  }
}

export function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function queuePayload(items: QueueItem[]): unknown {
  return { items };
}

export const HEALTH = {
  status: "ok",
  kb_entries: 3,
  index_rows: 3,
  embedder_fingerprint: "local",
};

export interface Deferred<T> {
  promise: Promise<T>;
  resolve: (value: T) => void;
  reject: (err: unknown) => void;
}

export function deferred<T>(): Deferred<T> {
  let resolve!: (value: T) => void;
  let reject!: (err: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

/** Small deterministic generator so randomized checks are reproducible. */
export function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

/** Let pending promise callbacks run. */
export async function flush(ticks = 12): Promise<void> {
  for (let i = 0; i < ticks; i++) {
    await Promise.resolve();
  }
}
