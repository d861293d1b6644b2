/** Pure HTML string renderers. No DOM access, so every view is unit-testable
 * as plain text; app.ts owns the single insertion point. */

import type { MachineEntry } from "./api.js";
import type { SessionViewModel } from "./model.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function renderMachineList(machines: MachineEntry[], selected: string | null): string {
  const rows = machines
    .map((m) => {
      const cls = m.machine_id === selected ? ' class="selected"' : "";
      return (
        `<li${cls}><button class="pick-machine" data-machine="${escapeHtml(m.machine_id)}">` +
        `${escapeHtml(m.machine_id)}</button> <span class="type">${escapeHtml(m.machine_type)}</span>` +
        ` <span class="meta">${m.series_count} series, ${m.maintenance_count} log entries</span></li>`
      );
    })
    .join("");
  return `<ul class="machines">${rows}</ul>`;
}

function renderDiagnosisPanel(view: SessionViewModel): string {
  const d = view.diagnosis;
  if (!d) {
    return '<aside class="diagnosis pending"><p>No diagnosis yet.</p></aside>';
  }
  const badge = d.warningBadge ? ' <span class="badge warning">needs review</span>' : "";
  const actions = d.actions.map((a) => `<li>${escapeHtml(a)}</li>`).join("");
  const warnings = d.warnings.length
    ? `<p class="warnings">Parse warnings: ${escapeHtml(d.warnings.join(", "))}</p>`
    : "";
  const error = d.error ? `<p class="error">Error: ${escapeHtml(d.error)}</p>` : "";
  return (
    `<aside class="diagnosis${d.warningBadge ? " warning" : ""}">` +
    `<h3>Diagnosis${badge}</h3>` +
    `<p class="headline">${escapeHtml(d.headline)}</p>` +
    (actions ? `<ol class="actions">${actions}</ol>` : "") +
    warnings +
    error +
    "</aside>"
  );
}

export function renderSession(view: SessionViewModel, inFlight: boolean): string {
  const cards = view.phaseCards
    .map((card) => {
      const note = card.note
        ? `<p class="note">Operator note: ${escapeHtml(card.note)}</p>`
        : "";
      return (
        '<article class="phase-card">' +
        `<h3>${escapeHtml(card.title)}</h3>` +
        note +
        `<p class="prompt-excerpt">${escapeHtml(card.promptExcerpt)}</p>` +
        `<pre class="response">${escapeHtml(card.response)}</pre>` +
        "</article>"
      );
    })
    .join("");

  const disabled = inFlight || !view.advanceEnabled ? " disabled" : "";
  const noteBox = view.noteAccepted
    ? '<input id="note" type="text" placeholder="Operator note for the next phase">'
    : "";
  const progress = `${view.phaseIndex}/${view.phaseTotal}`;

  return (
    '<section class="session">' +
    `<header><h2>${escapeHtml(view.machineLine)}</h2>` +
    `<span class="badge status">${escapeHtml(view.badge)}</span>` +
    `<span class="progress">${progress}</span></header>` +
    (view.error ? `<p class="error">${escapeHtml(view.error)}</p>` : "") +
    `<div class="phases">${cards}</div>` +
    renderDiagnosisPanel(view) +
    `<footer>${noteBox}<button id="advance"${disabled}>Advance</button></footer>` +
    "</section>"
  );
}

export function renderErrorBanner(message: string): string {
  return (
    `<div class="banner error" role="alert">${escapeHtml(message)}` +
    '<button class="dismiss">x</button></div>'
  );
}

/** Markdown pipe table to an HTML table. A pure textual reshaping: cell bytes
 * pass through untouched (then HTML-escaped); nothing is recomputed. */
export function markdownTableToHtml(markdown: string): string {
  const lines = markdown.split("\n").filter((line) => line.trim().length > 0);
  const htmlRows: string[] = [];
  for (const [index, line] of lines.entries()) {
    const cells = line
      .replace(/^\s*\|/, "")
      .replace(/\|\s*$/, "")
      .split("|")
      .map((c) => c.trim());
    if (cells.every((c) => /^:?-+:?$/.test(c))) {
      continue; // separator row
    }
    const tag = index === 0 ? "th" : "td";
    htmlRows.push(`<tr>${cells.map((c) => `<${tag}>${escapeHtml(c)}</${tag}>`).join("")}</tr>`);
  }
  return `<table class="report">${htmlRows.join("")}</table>`;
}

export function renderReportBrowser(
  reportIds: string[],
  selected: string | null,
  content: string | null,
  format: string,
): string {
  const items = reportIds
    .map((id) => {
      const cls = id === selected ? ' class="selected"' : "";
      return `<li${cls}><button class="pick-report" data-report="${escapeHtml(id)}">${escapeHtml(id)}</button></li>`;
    })
    .join("");
  let body = '<p class="empty">Select a report.</p>';
  if (content !== null) {
    body =
      format === "markdown"
        ? markdownTableToHtml(content)
        : `<pre class="report">${escapeHtml(content)}</pre>`;
  }
  return `<section class="reports"><ul class="report-list">${items}</ul>${body}</section>`;
}
