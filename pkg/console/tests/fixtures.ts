import type { SessionPayload } from "../src/api.js";

export function sessionPayload(overrides: Partial<SessionPayload> = {}): SessionPayload {
  return {
    schema_version: 1,
    session_id: "a".repeat(32),
    machine_id: "m-0003",
    strategy: "multi_round",
    backend_kind: "oracle",
    status: "awaiting_advance",
    phase_index: 0,
    phase_total: 3,
    phases: [],
    diagnosis: null,
    error: null,
    ...overrides,
  };
}

export function completedPayload(): SessionPayload {
  return sessionPayload({
    status: "complete",
    phase_index: 3,
    phases: [
      {
        phase: "summary",
        operator_note: null,
        prompt: "Restate the data summary.\n<!--phase:summary-->",
        response: "The machine shows a rising temperature trend.",
        retries_used: 0,
      },
      {
        phase: "analysis",
        operator_note: "vents feel hot",
        prompt: "Name the most likely fault.\n<!--phase:analysis-->",
        response: "Thermal runaway pattern.\nFAULT: overheating | CONFIDENCE: 0.95",
        retries_used: 0,
      },
      {
        phase: "action",
        operator_note: null,
        prompt: "List maintenance actions.\n<!--phase:action-->",
        response: "1. Inspect the cooling loop.\n2. Clean intake filters.",
        retries_used: 0,
      },
    ],
    diagnosis: {
      label: "overheating",
      confidence: 0.95,
      rationale: "Thermal runaway pattern.",
      actions: ["Inspect the cooling loop.", "Clean intake filters."],
      parse_warnings: [],
      error: null,
    },
  });
}
