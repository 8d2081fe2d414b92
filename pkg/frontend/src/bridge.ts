/**
 * Background-side request bridge. The popup cannot call the loopback
 * service directly (its origin is the extension, not the page), so it sends
 * a message to the service worker, which performs the fetch and relays the
 * response verbatim. Only the configured service URL is ever contacted,
 * and at most one request is in flight at a time.
 */

import type { BridgeResponse, PredictRequest, Transport } from "./transport.js";

export interface BridgeRequest {
  type: "predict";
  service_url: string;
  payload: PredictRequest;
}

export function isBridgeRequest(message: unknown): message is BridgeRequest {
  if (typeof message !== "object" || message === null) {
    return false;
  }
  const data = message as Record<string, unknown>;
  return data.type === "predict" && typeof data.service_url === "string" && typeof data.payload === "object";
}

export const REQUEST_TIMEOUT_MS = 10_000;

export class Bridge {
  private inFlight = false;

  constructor(private readonly transport: Transport) {}

  async handle(request: BridgeRequest): Promise<BridgeResponse> {
    if (this.inFlight) {
      return { kind: "busy", detail: "a prediction request is already running" };
    }
    this.inFlight = true;
    try {
      const base = request.service_url.replace(/\/+$/, "");
      return await this.transport.post(
        `${base}/api/v1/predict`,
        JSON.stringify(request.payload),
        REQUEST_TIMEOUT_MS,
      );
    } finally {
      this.inFlight = false;
    }
  }
}
