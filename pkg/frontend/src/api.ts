// Report loading with explicit error kinds so the UI can always show a
// banner instead of a blank page.

import type { Report } from "./types.js";

export type LoadErrorKind = "network" | "http" | "parse" | "schema";

export class ReportLoadError extends Error {
  readonly kind: LoadErrorKind;

  constructor(kind: LoadErrorKind, message: string) {
    super(message);
    this.name = "ReportLoadError";
    this.kind = kind;
  }
}

export const SUPPORTED_SCHEMA_VERSION = 1;

function fail(kind: LoadErrorKind, message: string): never {
  throw new ReportLoadError(kind, message);
}

function checkArray(value: unknown, name: string): void {
  if (!Array.isArray(value)) {
    fail("schema", `report.${name} must be an array`);
  }
}

export function validateReport(data: unknown): asserts data is Report {
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    fail("schema", "report must be a JSON object");
  }
  const report = data as Record<string, unknown>;
  if (report.schema_version !== SUPPORTED_SCHEMA_VERSION) {
    fail(
      "schema",
      `unsupported schema_version ${String(report.schema_version)}, ` +
        `expected ${SUPPORTED_SCHEMA_VERSION}`,
    );
  }
  const run = report.run as Record<string, unknown> | undefined;
  if (typeof run !== "object" || run === null || typeof run.config !== "object") {
    fail("schema", "report.run.config missing");
  }
  checkArray(report.scenes, "scenes");
  checkArray(report.curves, "curves");
  checkArray(report.summary_table, "summary_table");
  checkArray(report.groupings, "groupings");
  checkArray(report.trends, "trends");
  for (const scene of report.scenes as unknown[]) {
    const s = scene as Record<string, unknown>;
    if (typeof s?.scene_id !== "string" || typeof s?.scores !== "object") {
      fail("schema", "every scene needs scene_id and scores");
    }
    if (typeof s?.metrics !== "object" || s.metrics === null) {
      fail("schema", `scene ${String(s.scene_id)} has no metrics`);
    }
  }
  for (const curve of report.curves as unknown[]) {
    const c = curve as Record<string, unknown>;
    if (typeof c?.score_name !== "string" || !Array.isArray(c?.points)) {
      fail("schema", "every curve needs score_name and points");
    }
  }
}

export function deepFreeze<T>(value: T): T {
  if (value !== null && typeof value === "object" && !Object.isFrozen(value)) {
    Object.freeze(value);
    for (const key of Object.getOwnPropertyNames(value)) {
      deepFreeze((value as Record<string, unknown>)[key]);
    }
  }
  return value;
}

export type LoadOptions = {
  signal?: AbortSignal;
  fetchFn?: typeof fetch;
};

export async function loadReport(
  url: string,
  options: LoadOptions = {},
): Promise<Report> {
  const fetchFn = options.fetchFn ?? fetch;
  let response: Response;
  try {
    response = await fetchFn(url, { signal: options.signal });
  } catch (err) {
    if (err instanceof DOMException && err.name === "AbortError") {
      throw err; // cancellation is not an error state
    }
    fail("network", `could not reach ${url}: ${String(err)}`);
  }
  if (!response.ok) {
    fail("http", `${url} answered ${response.status}`);
  }
  let data: unknown;
  try {
    data = await response.json();
  } catch (err) {
    fail("parse", `response was not valid JSON: ${String(err)}`);
  }
  validateReport(data);
  return deepFreeze(data);
}

export function heatmapUrl(baseUrl: string, sceneId: string, metric: string): string {
  const base = baseUrl.replace(/\/$/, "");
  return `${base}/api/scene/${encodeURIComponent(sceneId)}/heatmap/${metric}.png`;
}
