// Typed wrapper over the suggestion service's JSON endpoints.

export interface StopSpec {
  kind: "none" | "max_words" | "entropy";
  t?: number;
  threshold?: number;
}

export interface SuggestRequest {
  prefix: string;
  context: string[];
  model: string;
  rerank: boolean;
  stop?: StopSpec;
  min_confidence?: number;
}

export interface Candidate {
  text: string;
  score: number;
  source: string;
}

export interface SuggestResponse {
  suggestion: string;
  confidence: number | null;
  source: string;
  latency_us: number;
  candidates?: Candidate[];
}

export interface ModelsResponse {
  models: string[];
  indices: Array<Record<string, unknown>>;
}

export class ServiceClient {
  constructor(public origin: string) {}

  async suggest(req: SuggestRequest, topk = 0): Promise<SuggestResponse> {
    const query = topk > 0 ? `?topk=${topk}` : "";
    const res = await fetch(`${this.origin}/v1/suggest${query}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    if (!res.ok) {
      throw new Error(`suggest failed with status ${res.status}`);
    }
    return (await res.json()) as SuggestResponse;
  }

  async models(): Promise<ModelsResponse> {
    const res = await fetch(`${this.origin}/v1/models`);
    if (!res.ok) {
      throw new Error(`models failed with status ${res.status}`);
    }
    return (await res.json()) as ModelsResponse;
  }
}
