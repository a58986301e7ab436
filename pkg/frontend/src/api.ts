// Thin typed client over the labeling service HTTP API. The fetch
// implementation is injectable so tests can fake the transport.

import type {
  AnnotatorStats,
  CandidatePage,
  CardView,
  LabelRecord,
  Reaction,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

/** Server rejected the reaction because the card is unknown. */
export class UnknownCandidateError extends Error {
  constructor(pointId: string) {
    super(`unknown candidate: ${pointId}`);
    this.name = "UnknownCandidateError";
  }
}

/** Transport-level failure (service unreachable, connection dropped). */
export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(`service unreachable: ${String(cause)}`);
    this.name = "NetworkError";
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = globalThis.fetch as unknown as FetchLike,
  ) {}

  private async get(path: string): Promise<unknown> {
    let response;
    try {
      response = await this.fetchFn(this.baseUrl + path);
    } catch (cause) {
      throw new NetworkError(cause);
    }
    if (!response.ok) {
      throw new Error(`GET ${path} failed with ${response.status}`);
    }
    return response.json();
  }

  async listPending(
    annotator: string | null,
    limit = 50,
    offset = 0,
  ): Promise<CandidatePage> {
    const params = new URLSearchParams({
      status: "pending",
      limit: String(limit),
      offset: String(offset),
    });
    if (annotator) params.set("annotator", annotator);
    return (await this.get(`/candidates?${params}`)) as CandidatePage;
  }

  async getCard(pointId: string, annotator: string | null): Promise<CardView> {
    const params = annotator ? `?annotator=${encodeURIComponent(annotator)}` : "";
    return (await this.get(
      `/candidates/${encodeURIComponent(pointId)}${params}`,
    )) as CardView;
  }

  async react(
    pointId: string,
    annotator: string,
    reaction: Reaction | "retract",
  ): Promise<CardView> {
    let response;
    try {
      response = await this.fetchFn(`${this.baseUrl}/reactions`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({
          point_id: pointId,
          annotator_id: annotator,
          reaction,
        }),
      });
    } catch (cause) {
      throw new NetworkError(cause);
    }
    if (response.status === 404) {
      throw new UnknownCandidateError(pointId);
    }
    if (!response.ok) {
      throw new Error(`POST /reactions failed with ${response.status}`);
    }
    return (await response.json()) as CardView;
  }

  async labels(month?: string, pointId?: string): Promise<LabelRecord[]> {
    const params = new URLSearchParams();
    if (month) params.set("month", month);
    if (pointId) params.set("point_id", pointId);
    const suffix = params.size > 0 ? `?${params}` : "";
    const body = (await this.get(`/labels${suffix}`)) as { labels: LabelRecord[] };
    return body.labels;
  }

  async annotatorStats(): Promise<AnnotatorStats[]> {
    const body = (await this.get("/annotators/stats")) as {
      annotators: AnnotatorStats[];
    };
    return body.annotators;
  }

  async healthy(): Promise<boolean> {
    try {
      const body = (await this.get("/healthz")) as { status: string };
      return body.status === "ok";
    } catch {
      return false;
    }
  }
}
