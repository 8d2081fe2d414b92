/**
 * Popup entry point: restores settings, asks the active tab for its page
 * context, and hands both to the prediction panel.
 */

import type { PageContext } from "./context.js";
import { PredictionPanel } from "./panel.js";
import { chromeSettingsStore, sanitizeSettings, WINDOW_CHOICES } from "./settings.js";
import type { BridgeRequest } from "./bridge.js";
import type { BridgeResponse, PredictRequest } from "./transport.js";

function sendToBackground(request: BridgeRequest): Promise<BridgeResponse> {
  return new Promise((resolve) => {
    chrome.runtime.sendMessage(request, (response) => {
      if (chrome.runtime.lastError || response === undefined) {
        resolve({
          kind: "network_error",
          detail: chrome.runtime.lastError?.message ?? "background worker did not respond",
        });
        return;
      }
      resolve(response as BridgeResponse);
    });
  });
}

function requestContext(): Promise<PageContext | null> {
  return new Promise((resolve) => {
    chrome.tabs.query({ active: true, currentWindow: true }, (tabs) => {
      const tabId = tabs[0]?.id;
      if (tabId === undefined) {
        resolve(null);
        return;
      }
      chrome.tabs.sendMessage(tabId, { type: "get_context" }, (response) => {
        if (chrome.runtime.lastError || !response) {
          resolve(null);
          return;
        }
        resolve(response as PageContext);
      });
    });
  });
}

document.addEventListener("DOMContentLoaded", () => {
  const windowSelect = document.getElementById("window-days") as HTMLSelectElement;
  const topKInput = document.getElementById("top-k") as HTMLInputElement;
  const urlInput = document.getElementById("service-url") as HTMLInputElement;
  const runButton = document.getElementById("run") as HTMLButtonElement;
  const results = document.getElementById("results") as HTMLElement;
  const contextLine = document.getElementById("context-line") as HTMLElement;

  const store = chromeSettingsStore();
  const panel = new PredictionPanel(
    runButton,
    results,
    (serviceUrl: string, payload: PredictRequest) =>
      sendToBackground({ type: "predict", service_url: serviceUrl, payload }),
    sanitizeSettings(undefined),
  );

  const syncSettings = () => {
    const settings = sanitizeSettings({
      window_days: Number(windowSelect.value),
      top_k: Number(topKInput.value),
      service_url: urlInput.value,
    });
    panel.updateSettings(settings);
    void store.save(settings);
  };

  void store.load().then((settings) => {
    if (!(WINDOW_CHOICES as readonly number[]).includes(settings.window_days)) {
      settings.window_days = 14;
    }
    windowSelect.value = String(settings.window_days);
    topKInput.value = String(settings.top_k);
    urlInput.value = settings.service_url;
    panel.updateSettings(settings);
  });

  windowSelect.addEventListener("change", syncSettings);
  topKInput.addEventListener("change", syncSettings);
  urlInput.addEventListener("change", syncSettings);

  void requestContext().then((context) => {
    panel.setContext(context);
    if (context === null || !context.is_gerrit) {
      contextLine.textContent = "not a Gerrit page";
    } else if (context.change_number === "") {
      contextLine.textContent = "Gerrit (no change open)";
    } else {
      contextLine.textContent = `${context.project} #${context.change_number}`;
    }
  });
});
