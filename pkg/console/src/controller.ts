/** Session and job flow control, kept free of DOM so tests can drive it with
 * a stubbed client. Mirrors the server's one-advance-at-a-time gate locally:
 * a second advance while one is outstanding is dropped, not queued. */

import { ApiError, GatewayClient, JobPayload, SessionPayload } from "./api.js";
import { SessionViewModel, bannerMessage, mapSessionToView } from "./model.js";

export const POLL_INTERVAL_MS = 1000;

export type Sleep = (ms: number) => Promise<void>;

const realSleep: Sleep = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export class SessionController {
  session: SessionPayload | null = null;
  banner: string | null = null;
  private pending = false;

  constructor(private readonly client: GatewayClient) {}

  get inFlight(): boolean {
    return this.pending;
  }

  view(): SessionViewModel | null {
    return this.session ? mapSessionToView(this.session) : null;
  }

  async start(machineId: string, strategy: string, backend: string): Promise<void> {
    this.session = await this.client.createSession(machineId, strategy, backend);
    this.banner = null;
  }

  /** Returns "advanced", "skipped" (already in flight), or "error". */
  async advance(note?: string): Promise<"advanced" | "skipped" | "error"> {
    if (this.pending || !this.session) {
      return "skipped";
    }
    this.pending = true;
    try {
      this.session = await this.client.advance(this.session.session_id, note);
      this.banner = null;
      return "advanced";
    } catch (error) {
      if (error instanceof ApiError) {
        this.banner = bannerMessage(error);
        if (error.status === 409) {
          // somebody else moved the session; adopt the server's state
          this.session = await this.client.getSession(this.session.session_id);
        }
        return "error";
      }
      throw error;
    } finally {
      this.pending = false;
    }
  }

  async refresh(): Promise<void> {
    if (this.session && !this.pending) {
      this.session = await this.client.getSession(this.session.session_id);
    }
  }
}

/** Poll an evaluation job at the standard 1 s cadence until it settles. */
export async function pollJob(
  client: GatewayClient,
  jobId: string,
  sleep: Sleep = realSleep,
  maxPolls = 120,
): Promise<JobPayload> {
  for (let i = 0; i < maxPolls; i++) {
    const state = await client.jobState(jobId);
    if (state.status !== "running") {
      return state;
    }
    await sleep(POLL_INTERVAL_MS);
  }
  throw new Error(`job ${jobId} still running after ${maxPolls} polls`);
}
