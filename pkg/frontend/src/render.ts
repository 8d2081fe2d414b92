/**
 * DOM rendering for the popup results area. Rows are emitted in the exact
 * order the service returned them; sorting is the service's job and the UI
 * must not second-guess it.
 */

import type { PredictResponse } from "./transport.js";

export function renderPredictions(container: HTMLElement, response: PredictResponse): void {
  container.textContent = "";

  if (response.predictions.length === 0) {
    const empty = document.createElement("div");
    empty.className = "empty-state";
    empty.textContent = `no related changes found in the last ${response.window_days} days`;
    container.appendChild(empty);
    return;
  }

  const list = document.createElement("ul");
  list.className = "result-list";
  for (const prediction of response.predictions) {
    const row = document.createElement("li");
    row.className = "result-row";

    const rank = document.createElement("span");
    rank.className = "rank";
    rank.textContent = `#${prediction.rank}`;

    const link = document.createElement("a");
    link.className = "subject";
    link.href = prediction.url;
    link.target = "_blank";
    link.rel = "noopener";
    link.textContent = prediction.subject || prediction.change_key;

    const badge = document.createElement("span");
    badge.className = "badge";
    badge.textContent = `${prediction.confidence_pct}% match`;

    row.append(rank, link, badge);
    list.appendChild(row);
  }
  container.appendChild(list);

  const timing = document.createElement("div");
  timing.className = "timing";
  timing.textContent = `scored in ${response.timing_ms} ms`;
  container.appendChild(timing);
}

export function renderError(container: HTMLElement, serviceUrl: string, detail: string): void {
  container.textContent = "";
  const banner = document.createElement("div");
  banner.className = "error-banner";
  banner.textContent = `request to ${serviceUrl} failed: ${detail}`;
  container.appendChild(banner);

  const retry = document.createElement("button");
  retry.className = "retry";
  retry.type = "button";
  retry.textContent = "retry";
  container.appendChild(retry);
}

export function renderNotice(container: HTMLElement, text: string): void {
  container.textContent = "";
  const notice = document.createElement("div");
  notice.className = "notice";
  notice.textContent = text;
  container.appendChild(notice);
}

export function renderLoading(container: HTMLElement): void {
  renderNotice(container, "scoring...");
}
