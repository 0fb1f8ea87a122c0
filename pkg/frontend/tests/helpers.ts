import { readFileSync } from "node:fs";
import { join } from "node:path";

import { deepFreeze, validateReport } from "../src/api.js";
import type { Report, ReportView, Scene } from "../src/types.js";
import { createView } from "../src/whatif.js";

// vitest runs from the package root; import.meta.url is http-scheme under
// jsdom, so the path is anchored on cwd instead
const fixturePath = join(process.cwd(), "tests", "fixtures", "report.json");

let cached: Report | null = null;

export function loadFixtureReport(): Report {
  if (cached === null) {
    const data: unknown = JSON.parse(readFileSync(fixturePath, "utf-8"));
    validateReport(data);
    cached = deepFreeze(data);
  }
  return cached;
}

export function fixtureView(activeScore?: string): ReportView {
  const view = createView(loadFixtureReport());
  if (activeScore !== undefined) {
    view.activeScore = activeScore;
  }
  return view;
}

export function makeScene(
  id: string,
  score: number | null,
  f1: number | null,
  scoreName = "variance",
): Scene {
  return {
    scene_id: id,
    scores: { [scoreName]: score },
    metrics: { f1 },
    attributes: {},
    flags: [],
  };
}

export function makeView(scenes: Scene[], activeScore = "variance"): ReportView {
  const report: Report = {
    schema_version: 1,
    run: {
      seed: 0,
      config: { failure_threshold: 0.5 },
      config_digest: "0".repeat(64),
    },
    scenes,
    curves: [
      {
        score_name: activeScore,
        points: [],
        aurc: 0,
        risk_at_half: 0,
        auc_nrf1: 0,
        nrf1_at_half: 0,
        undefined_f1_scenes: [],
      },
    ],
    summary_table: [],
    groupings: [],
    trends: [],
    combiner: null,
  };
  return createView(report);
}
