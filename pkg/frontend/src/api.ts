import type {
  CoverageSummary,
  GeoPayload,
  GreedyResponse,
  RearrangeResponse,
  WhatIfResponse,
  WhatIfSite,
} from "./types";

/** HTTP failure carrying the server's status and detail verbatim. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function readDetail(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return res.statusText || "request failed";
  }
}

/**
 * Thin typed client for the planning service. The single base-URL setting is
 * the UI's only configuration.
 */
export class Client {
  constructor(readonly baseUrl: string = "") {}

  private async get<T>(path: string): Promise<T> {
    const res = await fetch(`${this.baseUrl}${path}`);
    if (!res.ok) throw new ApiError(res.status, await readDetail(res));
    return (await res.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw new ApiError(res.status, await readDetail(res));
    return (await res.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.get("/v1/health");
  }

  coverage(): Promise<CoverageSummary> {
    return this.get("/v1/coverage");
  }

  geo(): Promise<GeoPayload> {
    return this.get("/v1/geo");
  }

  whatif(sites: WhatIfSite[]): Promise<WhatIfResponse> {
    return this.post("/v1/whatif", { sites });
  }

  greedy(k: number, scope: string): Promise<GreedyResponse> {
    return this.post("/v1/optimize/greedy", { k, scope });
  }

  rearrange(seed: number, samples: number, patience: number): Promise<RearrangeResponse> {
    return this.post("/v1/optimize/rearrange", { seed, samples, patience });
  }
}
