/** Thin client for the telemetry service HTTP API. */

export interface PredictResponse {
  class: number;
  probabilities: number[];
  relay: "on" | "off";
  mode: string;
}

export interface RelayResponse {
  relay: "on" | "off";
  mode: string;
}

export interface ModelInfo {
  kind: string;
  feature_names: string[];
  thresholds: { t1: number; t2: number };
  metadata: Record<string, unknown>;
}

export interface PinSnapshot {
  pins: Record<string, { value: number | null; timestamp: number | null }>;
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private base: string = "",
    private token: string | null = null,
    private fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  setToken(token: string | null): void {
    this.token = token || null;
  }

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["X-Api-Token"] = this.token;
    return headers;
  }

  private async parse<T>(response: Response): Promise<T> {
    if (!response.ok) {
      let detail = `HTTP ${response.status}`;
      try {
        const body = await response.json();
        if (body && body.detail) detail = String(body.detail);
      } catch {
        // non-JSON error body: keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async predict(features: Record<string, number>): Promise<PredictResponse> {
    const response = await this.fetchFn(`${this.base}/api/predict`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ features }),
    });
    return this.parse<PredictResponse>(response);
  }

  async setRelay(state: "on" | "off" | null, mode: "manual" | "release"): Promise<RelayResponse> {
    const body: Record<string, unknown> = { mode };
    if (state !== null) body.state = state;
    const response = await this.fetchFn(`${this.base}/api/relay`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(body),
    });
    return this.parse<RelayResponse>(response);
  }

  async model(): Promise<ModelInfo> {
    return this.parse<ModelInfo>(await this.fetchFn(`${this.base}/api/model`));
  }

  async pins(): Promise<PinSnapshot> {
    return this.parse<PinSnapshot>(await this.fetchFn(`${this.base}/api/pins`));
  }
}
