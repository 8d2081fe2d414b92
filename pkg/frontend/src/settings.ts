/**
 * Popup settings: the prediction window, how many suggestions to ask for,
 * and where the scoring service lives. Values persist in extension storage
 * so they survive the popup being closed and reopened.
 */

export interface UiSettings {
  window_days: number;
  top_k: number;
  service_url: string;
}

export const WINDOW_CHOICES = [2, 7, 14, 30] as const;

export const DEFAULT_SETTINGS: UiSettings = {
  window_days: 14,
  top_k: 5,
  service_url: "http://127.0.0.1:8787",
};

const STORAGE_KEY = "patchlink_settings";

/** Coerce arbitrary stored data back into a valid settings object. */
export function sanitizeSettings(raw: unknown): UiSettings {
  const out: UiSettings = { ...DEFAULT_SETTINGS };
  if (typeof raw !== "object" || raw === null) {
    return out;
  }
  const data = raw as Record<string, unknown>;

  const windowDays = data.window_days;
  if (typeof windowDays === "number" && (WINDOW_CHOICES as readonly number[]).includes(windowDays)) {
    out.window_days = windowDays;
  }

  const topK = data.top_k;
  if (typeof topK === "number" && Number.isInteger(topK)) {
    out.top_k = Math.min(10, Math.max(1, topK));
  }

  const serviceUrl = data.service_url;
  if (typeof serviceUrl === "string" && serviceUrl.trim() !== "") {
    out.service_url = serviceUrl.trim().replace(/\/+$/, "");
  }

  return out;
}

export interface SettingsStore {
  load(): Promise<UiSettings>;
  save(settings: UiSettings): Promise<void>;
}

/** Store backed by chrome.storage.local, for use inside the extension. */
export function chromeSettingsStore(): SettingsStore {
  return {
    load: () =>
      new Promise((resolve) => {
        chrome.storage.local.get([STORAGE_KEY], (items) => {
          resolve(sanitizeSettings(items[STORAGE_KEY]));
        });
      }),
    save: (settings) =>
      new Promise((resolve) => {
        chrome.storage.local.set({ [STORAGE_KEY]: settings }, () => resolve());
      }),
  };
}

/** In-memory store for tests. */
export function memorySettingsStore(initial?: unknown): SettingsStore {
  let stored: unknown = initial;
  return {
    load: () => Promise.resolve(sanitizeSettings(stored)),
    save: (settings) => {
      stored = { ...settings };
      return Promise.resolve();
    },
  };
}
