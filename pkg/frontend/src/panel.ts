/**
 * Prediction panel controller: wires the run button to the bridge and the
 * results area. Exactly one request per button press; the button stays
 * disabled while a request is in flight, and the retry button inside an
 * error banner goes through the same gate.
 */

import type { PageContext } from "./context.js";
import type { UiSettings } from "./settings.js";
import type { BridgeResponse, PredictRequest, PredictResponse } from "./transport.js";
import { parseErrorDetail } from "./transport.js";
import { renderError, renderLoading, renderNotice, renderPredictions } from "./render.js";

export type SendFn = (serviceUrl: string, payload: PredictRequest) => Promise<BridgeResponse>;

export class PredictionPanel {
  private inFlight = false;
  private context: PageContext | null = null;
  private settings: UiSettings;

  constructor(
    private readonly button: HTMLButtonElement,
    private readonly results: HTMLElement,
    private readonly send: SendFn,
    settings: UiSettings,
  ) {
    this.settings = settings;
    this.button.addEventListener("click", () => void this.run());
    this.results.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      if (target.classList?.contains("retry")) {
        void this.run();
      }
    });
  }

  updateSettings(settings: UiSettings): void {
    this.settings = settings;
  }

  setContext(context: PageContext | null): void {
    this.context = context;
    const ready = context !== null && context.is_gerrit && context.change_number !== "";
    this.button.disabled = !ready;
    if (context === null || !context.is_gerrit) {
      renderNotice(this.results, "open a Gerrit change page to look for related changes");
    } else if (context.change_number === "") {
      renderNotice(this.results, "this is a Gerrit page, but not a change: open a change to run predictions");
    }
  }

  async run(): Promise<void> {
    const context = this.context;
    if (this.inFlight || context === null || !context.is_gerrit || context.change_number === "") {
      return;
    }
    this.inFlight = true;
    this.button.disabled = true;
    renderLoading(this.results);

    const payload: PredictRequest = {
      change_id: context.change_number,
      project: context.project,
      window_days: this.settings.window_days,
      top_k: this.settings.top_k,
    };
    try {
      const outcome = await this.send(this.settings.service_url, payload);
      this.renderOutcome(outcome);
    } finally {
      this.inFlight = false;
      this.button.disabled = false;
    }
  }

  private renderOutcome(outcome: BridgeResponse): void {
    if (outcome.kind !== "response") {
      renderError(this.results, this.settings.service_url, outcome.detail);
      return;
    }
    if (outcome.status !== 200) {
      const fallback = `service returned status ${outcome.status}`;
      renderError(this.results, this.settings.service_url, parseErrorDetail(outcome.body, fallback));
      return;
    }
    let response: PredictResponse;
    try {
      response = JSON.parse(outcome.body) as PredictResponse;
    } catch {
      renderError(this.results, this.settings.service_url, "service returned unparseable JSON");
      return;
    }
    renderPredictions(this.results, response);
  }
}
