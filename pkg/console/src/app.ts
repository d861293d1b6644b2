/** Single-page wiring: machines list, session wizard, report browser. All
 * state lives here; views are re-rendered whole from pure functions. */

import { ApiError, GatewayClient, MachineEntry } from "./api.js";
import { POLL_INTERVAL_MS, SessionController, pollJob } from "./controller.js";
import { bannerMessage } from "./model.js";
import {
  renderErrorBanner,
  renderMachineList,
  renderReportBrowser,
  renderSession,
} from "./render.js";

interface AppState {
  machines: MachineEntry[];
  backends: string[];
  selectedMachine: string | null;
  strategy: string;
  reports: string[];
  selectedReport: string | null;
  reportContent: string | null;
  banner: string | null;
}

export function startApp(root: HTMLElement, baseUrl: string): void {
  const client = new GatewayClient(baseUrl);
  const controller = new SessionController(client);
  const state: AppState = {
    machines: [],
    backends: [],
    selectedMachine: null,
    strategy: "multi_round",
    reports: [],
    selectedReport: null,
    reportContent: null,
    banner: null,
  };

  function draw(): void {
    const view = controller.view();
    const banner = state.banner ?? controller.banner;
    root.innerHTML =
      (banner ? renderErrorBanner(banner) : "") +
      "<h1>faultconsult console</h1>" +
      renderMachineList(state.machines, state.selectedMachine) +
      strategyPicker(state.strategy) +
      (view ? renderSession(view, controller.inFlight) : '<p class="empty">Pick a machine to begin.</p>') +
      renderReportBrowser(state.reports, state.selectedReport, state.reportContent, "markdown") +
      '<button id="run-eval">Evaluate dataset</button>';
  }

  function strategyPicker(current: string): string {
    const options = ["multi_round", "single_shot", "cot"]
      .map((s) => `<option value="${s}"${s === current ? " selected" : ""}>${s}</option>`)
      .join("");
    return `<select id="strategy">${options}</select>`;
  }

  function fail(error: unknown): void {
    state.banner = error instanceof ApiError ? bannerMessage(error) : String(error);
    draw();
  }

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.matches("button.pick-machine")) {
      const machineId = target.dataset["machine"];
      if (machineId) {
        state.selectedMachine = machineId;
        state.banner = null;
        controller.start(machineId, state.strategy, "oracle").then(draw, fail);
      }
    } else if (target.matches("#advance")) {
      const noteInput = root.querySelector<HTMLInputElement>("#note");
      const note = noteInput && noteInput.value.trim() ? noteInput.value.trim() : undefined;
      draw(); // repaint immediately so the control greys out while in flight
      controller.advance(note).then(draw, fail);
    } else if (target.matches("#run-eval")) {
      client
        .startEvaluation([state.strategy])
        .then(({ job_id }) => pollJob(client, job_id))
        .then(() => client.listReports())
        .then(({ reports }) => {
          state.reports = reports;
          draw();
        }, fail);
    } else if (target.matches("button.pick-report")) {
      const reportId = target.dataset["report"];
      if (reportId) {
        client.fetchReport(reportId, "table2", "markdown").then((doc) => {
          state.selectedReport = reportId;
          state.reportContent = doc.content;
          draw();
        }, fail);
      }
    } else if (target.matches("button.dismiss")) {
      state.banner = null;
      controller.banner = null;
      draw();
    }
  });

  root.addEventListener("change", (event) => {
    const target = event.target as HTMLElement;
    if (target.matches("#strategy")) {
      state.strategy = (target as HTMLSelectElement).value;
    }
  });

  client.listMachines().then((payload) => {
    state.machines = payload.machines;
    state.backends = payload.backends;
    draw();
  }, fail);

  // keep the session and report list fresh; the service does not push
  setInterval(() => {
    controller.refresh().then(draw, () => undefined);
    client.listReports().then(({ reports }) => {
      if (reports.length !== state.reports.length) {
        state.reports = reports;
        draw();
      }
    }, () => undefined);
  }, POLL_INTERVAL_MS);

  draw();
}
