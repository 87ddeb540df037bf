/** Typed client for the trajstitch service.
 *
 * Error bodies are `{code, message}`; codes map to inline advice (an
 * exhausted database suggests seeding a larger one).  Each panel tags its
 * queries with a token so a stale response never overwrites a newer one.
 */

import type {
  BoundsResponse,
  DatabaseInfo,
  ErrorBody,
  FidelityRequest,
  FidelityResponse,
  PolicyQueryRequest,
  QuantileSeries,
  TrajectoryQueryResponse,
} from "./types.js";

export class ServiceError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.code = code;
    this.status = status;
  }

  /** Human-readable explanation for inline display. */
  get advice(): string {
    switch (this.code) {
      case "exhaustion":
        return (
          "The database ran out of unused matching transitions for this " +
          "query. Seed a larger database (more trajectories or a longer " +
          "horizon) or lower n."
        );
      case "unknown_db":
        return "That database is not loaded on the service.";
      case "unknown_set":
        return "That trajectory set has expired from the service cache; resubmit the query.";
      case "bad_policy":
        return "The policy class or its parameters were rejected.";
      case "bad_params":
        return "The request was malformed.";
      default:
        return this.message;
    }
  }
}

async function parseError(res: Response): Promise<ServiceError> {
  let body: Partial<ErrorBody> = {};
  try {
    body = (await res.json()) as Partial<ErrorBody>;
  } catch {
    /* non-JSON error body */
  }
  return new ServiceError(
    body.code ?? "http_error",
    body.message ?? `HTTP ${res.status}`,
    res.status,
  );
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(base = "", fetchFn: FetchLike = (i, n) => fetch(i, n)) {
    this.base = base.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  private async get<T>(path: string): Promise<T> {
    const res = await this.fetchFn(`${this.base}${path}`);
    if (!res.ok) throw await parseError(res);
    return (await res.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await this.fetchFn(`${this.base}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw await parseError(res);
    return (await res.json()) as T;
  }

  databases(dispersionK?: number): Promise<DatabaseInfo[]> {
    const q = dispersionK ? `?dispersion_k=${dispersionK}` : "";
    return this.get(`/api/databases${q}`);
  }

  trajectories(req: PolicyQueryRequest): Promise<TrajectoryQueryResponse> {
    return this.post("/api/trajectories", req);
  }

  fanchart(
    setId: string,
    variable: string,
    levels?: number[],
  ): Promise<QuantileSeries> {
    const params = new URLSearchParams({ set_id: setId, variable });
    if (levels) params.set("levels", levels.join(","));
    return this.get(`/api/fanchart?${params.toString()}`);
  }

  fidelity(req: FidelityRequest): Promise<FidelityResponse> {
    return this.post("/api/fidelity", req);
  }

  bounds(query: {
    db_id: string;
    h: number;
    n: number;
    constants: number[];
    kind?: "factored" | "full_state";
    sigma_h?: number;
    k?: number;
  }): Promise<BoundsResponse> {
    const params = new URLSearchParams({
      db_id: query.db_id,
      h: String(query.h),
      n: String(query.n),
      constants: query.constants.join(","),
      kind: query.kind ?? "factored",
      sigma_h: String(query.sigma_h ?? 0),
    });
    if (query.k !== undefined) params.set("k", String(query.k));
    return this.get(`/api/bounds?${params.toString()}`);
  }
}

/** At most one live query per panel: starting a new one invalidates the
 * previous token, and results carried by a stale token are dropped. */
export class QueryLatch {
  private token = 0;

  /** Begin a query; returns a guard that is true only while still current. */
  begin(): () => boolean {
    const mine = ++this.token;
    return () => this.token === mine;
  }
}
