/** Typed client for the gateway HTTP API. No domain logic lives here: the
 * console displays what the service says, byte for byte. */

export interface MachineEntry {
  machine_id: string;
  machine_type: string;
  rotation_freq_hz: number;
  gold_label: string | null;
  series_count: number;
  maintenance_count: number;
}

export interface MachinesPayload {
  machines: MachineEntry[];
  backends: string[];
}

export interface PhasePayload {
  phase: string;
  operator_note: string | null;
  prompt: string;
  response: string;
  retries_used: number;
}

export interface DiagnosisPayload {
  label: string;
  confidence: number;
  rationale: string;
  actions: string[];
  parse_warnings: string[];
  error: string | null;
}

export interface SessionPayload {
  schema_version: number;
  session_id: string;
  machine_id: string;
  strategy: string;
  backend_kind: string;
  status: string;
  phase_index: number;
  phase_total: number;
  phases: PhasePayload[];
  diagnosis: DiagnosisPayload | null;
  error: string | null;
}

export interface JobPayload {
  job_id: string;
  status: "running" | "done" | "failed";
  report_id: string | null;
  error: string | null;
}

export interface RenderedReportPayload {
  report_id: string;
  layout: string;
  format: string;
  content: string;
  report: unknown;
}

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function toError(response: Response): Promise<ApiError> {
  let code = "UnknownError";
  let message = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { error?: { code?: string; message?: string } };
    if (body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the defaults
  }
  return new ApiError(code, message, response.status);
}

export class GatewayClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      throw await toError(response);
    }
    return (await response.json()) as T;
  }

  listMachines(): Promise<MachinesPayload> {
    return this.request("GET", "/api/machines");
  }

  createSession(machineId: string, strategy: string, backend: string): Promise<SessionPayload> {
    return this.request("POST", "/api/sessions", {
      machine_id: machineId,
      strategy,
      backend,
    });
  }

  getSession(sessionId: string): Promise<SessionPayload> {
    return this.request("GET", `/api/sessions/${sessionId}`);
  }

  advance(sessionId: string, operatorNote?: string): Promise<SessionPayload> {
    const body = operatorNote === undefined ? {} : { operator_note: operatorNote };
    return this.request("POST", `/api/sessions/${sessionId}/advance`, body);
  }

  startEvaluation(strategies: string[], backend = "oracle"): Promise<{ job_id: string }> {
    return this.request("POST", "/api/evaluate", { strategies, backend });
  }

  jobState(jobId: string): Promise<JobPayload> {
    return this.request("GET", `/api/jobs/${jobId}`);
  }

  listReports(): Promise<{ reports: string[] }> {
    return this.request("GET", "/api/reports");
  }

  fetchReport(reportId: string, layout: string, format: string): Promise<RenderedReportPayload> {
    const query = new URLSearchParams({ layout, format });
    return this.request("GET", `/api/reports/${reportId}?${query}`);
  }
}
