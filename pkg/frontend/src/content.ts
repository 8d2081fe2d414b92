/**
 * Content script: answers "what page is this?" queries from the popup.
 * Content scripts load as classic scripts, so the detection module is
 * pulled in with a dynamic import of an extension-packaged resource.
 */

import type { detectContext as DetectFn } from "./context.js";

type ContextModule = { detectContext: typeof DetectFn };

let modulePromise: Promise<ContextModule> | null = null;

function loadContextModule(): Promise<ContextModule> {
  if (modulePromise === null) {
    modulePromise = import(chrome.runtime.getURL("dist/context.js"));
  }
  return modulePromise;
}

chrome.runtime.onMessage.addListener((message, _sender, sendResponse) => {
  if (typeof message !== "object" || message === null) {
    return false;
  }
  if ((message as Record<string, unknown>).type !== "get_context") {
    return false;
  }
  loadContextModule()
    .then((mod) => sendResponse(mod.detectContext(document, location.href)))
    .catch(() => sendResponse(null));
  return true;
});
