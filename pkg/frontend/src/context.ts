/**
 * Page context detection: decides whether the active tab is a Gerrit review
 * UI and, if so, which change is open. Gerrit's web UI mounts a <gr-app>
 * root element, and change pages live under /c/{project}/+/{number}
 * (project names may contain slashes, and a patchset suffix may follow the
 * number).
 */

export interface PageContext {
  is_gerrit: boolean;
  change_number: string;
  project: string;
  subject: string;
  page_url: string;
}

const CHANGE_PATH = /\/c\/(.+)\/\+\/(\d+)/;

// Selectors seen across Gerrit versions for the change header subject.
const SUBJECT_SELECTORS = ".headerSubject, .header-title .subject, gr-change-view .subject";

export function emptyContext(pageUrl = ""): PageContext {
  return { is_gerrit: false, change_number: "", project: "", subject: "", page_url: pageUrl };
}

export function detectContext(doc: Document, pageUrl: string): PageContext {
  if (doc.querySelector("gr-app") === null) {
    return emptyContext(pageUrl);
  }

  let project = "";
  let changeNumber = "";
  const match = CHANGE_PATH.exec(pathOf(pageUrl));
  if (match) {
    project = decodeURIComponent(match[1]);
    changeNumber = match[2];
  }

  // Dashboards and search pages are still Gerrit, just without a change:
  // the popup shows guidance instead of a run button in that case.
  return {
    is_gerrit: true,
    change_number: changeNumber,
    project,
    subject: changeNumber ? subjectOf(doc) : "",
    page_url: pageUrl,
  };
}

function pathOf(pageUrl: string): string {
  try {
    return new URL(pageUrl).pathname;
  } catch {
    return pageUrl;
  }
}

function subjectOf(doc: Document): string {
  const header = doc.querySelector(SUBJECT_SELECTORS)?.textContent?.trim();
  if (header) {
    return header;
  }
  return subjectFromTitle(doc.title);
}

/** Tab titles look like "12345: Fix scheduler race · Gerrit Code Review". */
export function subjectFromTitle(title: string): string {
  return title
    .replace(/\s*·.*$/, "")
    .replace(/^\d+:\s*/, "")
    .trim();
}
