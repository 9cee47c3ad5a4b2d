/** Typed client for the review service's /v1 endpoints. */

export interface EnsembleSource {
  kind: "ensemble";
  winner_model: string;
  final_score: number;
  dimension_scores: number[];
  weights: number[];
}

export interface RagSource {
  kind: "rag";
}

export type Source = EnsembleSource | RagSource;

export interface ItemStatus {
  state: "pending" | "approved" | "rejected";
  reviewer_id?: string;
  reason?: string;
  decided_at?: string;
}

export interface QueueItem {
  item_id: number;
  question: string;
  answer: string;
  cause: string;
  source: Source;
  created_at: string;
  status: ItemStatus;
}

export interface DecisionRequest {
  decision: "approve" | "reject";
  reviewer_id: string;
  reason?: string;
}

export interface DecisionResponse {
  status: string;
  item_id: number;
  entry_id: number | null;
}

export interface Health {
  status: string;
  kb_entries: number;
  index_rows: number;
  embedder_fingerprint: string;
}

/** Error from the service, carrying the HTTP status and the body's error code. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/**
 * Thin fetch wrapper around the service API.
 *
 * The fetch implementation is injectable so tests can run against canned
 * responses; everything else is server-authoritative — no client-side state.
 */
export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = (...args) => fetch(...args),
  ) {}

  /** Pending review items, oldest first (exactly the server payload). */
  async queue(): Promise<QueueItem[]> {
    const body = await this.request<{ items: QueueItem[] }>("GET", "/v1/review/queue");
    return body.items;
  }

  async decide(itemId: number, body: DecisionRequest): Promise<DecisionResponse> {
    return this.request<DecisionResponse>("POST", `/v1/review/${itemId}/decision`, body);
  }

  async health(): Promise<Health> {
    return this.request<Health>("GET", "/v1/healthz");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers: body === undefined ? undefined : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, "unreachable", `cannot reach ${this.baseUrl}: ${String(err)}`);
    }
    if (!response.ok) {
      throw await this.toApiError(response);
    }
    return (await response.json()) as T;
  }

  private async toApiError(response: Response): Promise<ApiError> {
    let code = "http_error";
    let message = `${response.status} ${response.statusText}`;
    try {
      const body = (await response.json()) as { code?: string; message?: string };
      if (typeof body.code === "string") code = body.code;
      if (typeof body.message === "string") message = body.message;
    } catch {
      // non-JSON error body; keep the status-line message
    }
    return new ApiError(response.status, code, message);
  }
}
