/** Pure mapping from API payloads to view models. Every displayed string is
 * derived from payload fields; no diagnosis logic happens on this side. */

import type { ApiError, SessionPayload } from "./api.js";

export const SCHEMA_VERSION = 1;

export class SchemaMismatch extends Error {
  constructor(version: number) {
    super(`unsupported session schema version ${version}`);
    this.name = "SchemaMismatch";
  }
}

const LABEL_NAMES: Record<string, string> = {
  normal: "Normal",
  misalignment: "Misalignment",
  bearing_wear: "Bearing wear",
  overheating: "Overheating",
  unknown: "Undetermined",
};

const STATUS_BADGES: Record<string, string> = {
  awaiting_advance: "Awaiting advance",
  in_flight: "In flight",
  complete: "Complete",
  failed: "Failed",
};

const PHASE_TITLES: Record<string, string> = {
  summary: "Summary",
  analysis: "Analysis",
  action: "Action",
  single: "Single shot",
};

const EXCERPT_LENGTH = 160;

export interface PhaseCard {
  title: string;
  promptExcerpt: string;
  response: string;
  note: string | null;
}

export interface DiagnosisView {
  headline: string;
  label: string;
  confidencePercent: string;
  actions: string[];
  warnings: string[];
  warningBadge: boolean;
  error: string | null;
}

export interface SessionViewModel {
  sessionId: string;
  machineLine: string;
  strategy: string;
  badge: string;
  phaseCards: PhaseCard[];
  phaseIndex: number;
  phaseTotal: number;
  advanceEnabled: boolean;
  noteAccepted: boolean;
  diagnosis: DiagnosisView | null;
  error: string | null;
}

export function humanLabel(token: string): string {
  return LABEL_NAMES[token] ?? "Undetermined";
}

export function formatPercent(confidence: number): string {
  return `${Math.round(confidence * 100)}%`;
}

function excerpt(text: string): string {
  const flat = text.replace(/\s+/g, " ").trim();
  return flat.length <= EXCERPT_LENGTH ? flat : `${flat.slice(0, EXCERPT_LENGTH - 3)}...`;
}

export function mapSessionToView(payload: SessionPayload): SessionViewModel {
  if (payload.schema_version !== SCHEMA_VERSION) {
    throw new SchemaMismatch(payload.schema_version);
  }

  const phaseCards = payload.phases.map((p, i) => ({
    title: `Phase ${i + 1}: ${PHASE_TITLES[p.phase] ?? p.phase}`,
    promptExcerpt: excerpt(p.prompt),
    response: p.response,
    note: p.operator_note,
  }));

  let diagnosis: DiagnosisView | null = null;
  if (payload.diagnosis) {
    const d = payload.diagnosis;
    const label = humanLabel(d.label);
    const confidencePercent = formatPercent(d.confidence);
    diagnosis = {
      headline: `${label} - ${confidencePercent}`,
      label,
      confidencePercent,
      actions: [...d.actions],
      warnings: [...d.parse_warnings],
      warningBadge: d.label === "unknown",
      error: d.error,
    };
  }

  // a note rides on the next advance, which only analysis/action accept
  const nextAcceptsNote =
    payload.status === "awaiting_advance" && payload.phase_total > 1 && payload.phase_index >= 1;

  return {
    sessionId: payload.session_id,
    machineLine: `${payload.machine_id} (${payload.strategy} via ${payload.backend_kind})`,
    strategy: payload.strategy,
    badge: STATUS_BADGES[payload.status] ?? payload.status,
    phaseCards,
    phaseIndex: payload.phase_index,
    phaseTotal: payload.phase_total,
    advanceEnabled: payload.status === "awaiting_advance",
    noteAccepted: nextAcceptsNote,
    diagnosis,
    error: payload.error,
  };
}

/** Friendly banner text for an API failure; errors are never silent. */
export function bannerMessage(error: ApiError): string {
  switch (error.code) {
    case "SessionComplete":
      return "Session already complete";
    case "SessionBusy":
      return "An advance is already in flight";
    case "NoteNotAllowed":
      return "This phase does not accept an operator note";
    default:
      return `${error.code}: ${error.message}`;
  }
}
