/**
 * Service worker entry point. Listens for bridge requests from the popup
 * and performs the actual HTTP calls against the configured scoring
 * service.
 */

import { Bridge, isBridgeRequest } from "./bridge.js";
import { fetchTransport } from "./transport.js";

const bridge = new Bridge(fetchTransport);

chrome.runtime.onMessage.addListener((message, _sender, sendResponse) => {
  if (!isBridgeRequest(message)) {
    return false;
  }
  bridge
    .handle(message)
    .then(sendResponse)
    .catch((err: unknown) => {
      sendResponse({
        kind: "network_error",
        detail: err instanceof Error ? err.message : String(err),
      });
    });
  // Keep the message channel open for the async response.
  return true;
});
