/** Typed client for the retrieval service's JSON API. */

export interface RankedResult {
  id: string;
  class: string;
  score: number;
  uri: string;
  rank: number;
  caption: string | null;
}

export interface Candidate {
  class: string;
  score: number;
  support: number;
}

export interface QueryResponse {
  results: RankedResult[];
  candidates: Candidate[];
  timing: { search_ms: number; embed_ms?: number };
  gallery_count: number;
}

export interface HealthInfo {
  status: string;
  gallery_size: number;
  dim: number;
  default_k: number;
  max_k: number;
}

export interface ClassEntry {
  label: string;
  count: number;
}

/** Error body the service returns for every non-2xx response. */
export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public retriable: boolean,
  ) {
    super(message);
  }
}

async function asApiError(response: Response): Promise<ApiError> {
  let code = "unknown";
  let message = `HTTP ${response.status}`;
  let retriable = false;
  try {
    const body = await response.json();
    code = body.error ?? code;
    message = body.message ?? message;
    retriable = body.retriable === true;
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ApiError(response.status, code, message, retriable);
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, init);
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") throw err;
      throw new ApiError(0, "network", `service unreachable: ${err}`, true);
    }
    if (!response.ok) throw await asApiError(response);
    return response.json() as Promise<T>;
  }

  health(): Promise<HealthInfo> {
    return this.request("/api/health");
  }

  classes(): Promise<{ classes: ClassEntry[] }> {
    return this.request("/api/classes");
  }

  queryText(text: string, k: number, signal?: AbortSignal): Promise<QueryResponse> {
    return this.request("/api/query/text", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text, k }),
      signal,
    });
  }

  queryImage(file: File, k: number, signal?: AbortSignal): Promise<QueryResponse> {
    const form = new FormData();
    form.append("file", file);
    return this.request(`/api/query/image?k=${k}`, {
      method: "POST",
      body: form,
      signal,
    });
  }

  /** URL the service streams a record's image from (404s fall back to a placeholder). */
  imageUrl(id: string): string {
    return `${this.baseUrl}/api/image/${encodeURIComponent(id)}`;
  }
}
