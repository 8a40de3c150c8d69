/** Thin typed client for the labeling service's four endpoints. */

export interface PendingPair {
  u: string;
  v: string;
}

export type NextResponse = PendingPair | { done: true; ranking: string[] };

export interface SessionState {
  id: string;
  state: "running" | "done" | "error";
  items: string[];
  answered: number;
  pending: PendingPair | null;
  ranking: string[] | null;
}

export class StalePairError extends Error {
  constructor(public pending: PendingPair | null) {
    super("answer did not match the pending pair");
  }
}

export class ApiError extends Error {
  constructor(public code: string, message: string) {
    super(message);
  }
}

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class Api {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request(path: string, body?: unknown): Promise<unknown> {
    const res = await this.fetchImpl(this.baseUrl + path, body === undefined
      ? undefined
      : {
          method: "POST",
          headers: { "content-type": "application/json" },
          body: JSON.stringify(body),
        });
    const data = (await res.json()) as Record<string, unknown>;
    if (res.status === 409) {
      throw new StalePairError((data.pending as PendingPair) ?? null);
    }
    if (res.status >= 400) {
      throw new ApiError(String(data.error ?? res.status), String(data.message ?? ""));
    }
    return data;
  }

  async createSession(items: string[], eps?: number): Promise<string> {
    const body: Record<string, unknown> = { items };
    if (eps !== undefined) body.eps = eps;
    const data = (await this.request("/sessions", body)) as { id: string };
    return data.id;
  }

  async next(id: string): Promise<NextResponse> {
    return (await this.request(`/sessions/${id}/next`)) as NextResponse;
  }

  async answer(id: string, u: string, v: string, preferred: string): Promise<void> {
    await this.request(`/sessions/${id}/answer`, { u, v, preferred });
  }

  async state(id: string): Promise<SessionState> {
    return (await this.request(`/sessions/${id}`)) as SessionState;
  }
}
