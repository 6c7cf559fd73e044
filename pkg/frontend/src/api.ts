/**
 * Typed client for the label server's JSON API.
 */

export interface NextItem {
  id: string;
  image: string; // data URI, rendered directly as img src
  remaining: number;
}

export type NextResponse = NextItem | { done: true };

export interface Progress {
  labeled: number;
  total: number;
}

/** Non-2xx response; message is the server's error text verbatim. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface LabelApi {
  next(): Promise<NextResponse>;
  label(id: string, label: string): Promise<void>;
  skip(id: string): Promise<void>;
  progress(): Promise<Progress>;
}

// Structural subset of fetch, so tests can swap in a plain node-http shim.
export interface MinimalResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<MinimalResponse>;

async function request(fetchFn: FetchLike, url: string, init?: RequestInit): Promise<unknown> {
  const response = await fetchFn(url, init);
  const body: unknown = await response.json().catch(() => ({}));
  if (!response.ok) {
    const error = (body as { error?: unknown }).error;
    const message =
      typeof error === "string" ? error : `request failed with status ${response.status}`;
    throw new ApiError(response.status, message);
  }
  return body;
}

export function httpApi(
  base = "",
  fetchFn: FetchLike = (url, init) => fetch(url, init),
): LabelApi {
  const post = (path: string, payload: object) =>
    request(fetchFn, base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  return {
    next: () => request(fetchFn, base + "/api/next") as Promise<NextResponse>,
    label: async (id, label) => {
      await post("/api/label", { id, label });
    },
    skip: async (id) => {
      await post("/api/skip", { id });
    },
    progress: () => request(fetchFn, base + "/api/progress") as Promise<Progress>,
  };
}
