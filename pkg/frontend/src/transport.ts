/**
 * Wire types for the scoring service plus the low-level HTTP transport.
 * The transport reports outcomes as tagged values instead of throwing, so
 * callers can relay upstream responses verbatim and distinguish network
 * failures from timeouts.
 */

export interface PredictRequest {
  change_id: string;
  project: string;
  window_days: number;
  top_k: number;
}

export interface Prediction {
  rank: number;
  change_key: string;
  score: number;
  confidence_pct: number;
  subject: string;
  url: string;
}

export interface PredictResponse {
  target: { change_key: string; subject: string; url: string };
  window_days: number;
  top_k: number;
  window_mode: string;
  predictions: Prediction[];
  timing_ms: number;
}

export type BridgeResponse =
  | { kind: "response"; status: number; body: string }
  | { kind: "network_error"; detail: string }
  | { kind: "timeout"; detail: string }
  | { kind: "busy"; detail: string };

export interface Transport {
  post(url: string, body: string, timeoutMs: number): Promise<BridgeResponse>;
}

export const fetchTransport: Transport = {
  async post(url, body, timeoutMs) {
    const controller = new AbortController();
    const timer = setTimeout(() => controller.abort(), timeoutMs);
    try {
      const response = await fetch(url, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body,
        signal: controller.signal,
      });
      return { kind: "response", status: response.status, body: await response.text() };
    } catch (err) {
      if (controller.signal.aborted) {
        return { kind: "timeout", detail: `no response within ${timeoutMs} ms` };
      }
      return { kind: "network_error", detail: err instanceof Error ? err.message : String(err) };
    } finally {
      clearTimeout(timer);
    }
  },
};

/** Pull the "error" field out of a service error body, if there is one. */
export function parseErrorDetail(body: string, fallback: string): string {
  try {
    const parsed = JSON.parse(body);
    if (typeof parsed === "object" && parsed !== null && typeof parsed.error === "string") {
      return parsed.error;
    }
  } catch {
    // Not JSON; fall through.
  }
  return fallback;
}
