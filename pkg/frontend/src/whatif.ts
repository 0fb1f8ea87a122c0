// Client-side what-if math over the loaded report. The rules mirror the
// server's published curves exactly: a scene is discarded when its score
// is strictly above the threshold, a missing score is always discarded,
// and a scene whose F1 is undefined counts as 1.0 in retained means.

import type { Report, ReportView, Scene } from "./types.js";

export type RetainedMetrics = {
  coverage: number;
  meanF1: number | null;
  risk: number | null;
  keptIds: string[];
};

export function sceneScore(scene: Scene, scoreName: string): number | null {
  const value = scene.scores[scoreName];
  return value === undefined ? null : value;
}

export function flagAtThreshold(
  scores: (number | null)[],
  threshold: number,
): boolean[] {
  if (Number.isNaN(threshold)) {
    throw new Error("threshold must not be NaN");
  }
  return scores.map((s) => s === null || s > threshold);
}

export function recomputeRetained(
  view: ReportView,
  threshold: number,
): RetainedMetrics {
  const scenes = view.report.scenes;
  if (scenes.length === 0) {
    return { coverage: 0, meanF1: null, risk: null, keptIds: [] };
  }
  const scores = scenes.map((s) => sceneScore(s, view.activeScore));
  const discard = flagAtThreshold(scores, threshold);
  const kept = scenes.filter((_, i) => !discard[i]);
  if (kept.length === 0) {
    return { coverage: 0, meanF1: null, risk: null, keptIds: [] };
  }
  let total = 0;
  for (const scene of kept) {
    total += scene.metrics.f1 ?? 1.0;
  }
  const meanF1 = total / kept.length;
  return {
    coverage: kept.length / scenes.length,
    meanF1,
    risk: 1 - meanF1,
    keptIds: kept.map((s) => s.scene_id),
  };
}

// Threshold that keeps exactly the m lowest-scoring scenes, or null when
// ties at the boundary make that partition unreachable by a strict cut.
// Scenes without the score never count toward m (they are always
// discarded).
export function thresholdForKeptCount(
  view: ReportView,
  m: number,
): number | null {
  const present = view.report.scenes
    .map((s) => sceneScore(s, view.activeScore))
    .filter((v): v is number => v !== null)
    .sort((a, b) => a - b);
  if (m < 0 || m > present.length) {
    return null;
  }
  if (m === 0) {
    return present.length > 0 ? present[0] - 1 : 0;
  }
  const hi = present[m - 1]; // largest kept score
  if (m === present.length) {
    return hi;
  }
  const lo = present[m]; // smallest discarded score
  if (hi === lo) {
    return null;
  }
  return hi + (lo - hi) / 2;
}

export function scoreRange(view: ReportView): { min: number; max: number } | null {
  let min = Infinity;
  let max = -Infinity;
  for (const scene of view.report.scenes) {
    const v = sceneScore(scene, view.activeScore);
    if (v !== null) {
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  return min <= max ? { min, max } : null;
}

export function clampThreshold(view: ReportView, threshold: number): number {
  const range = scoreRange(view);
  if (range === null) {
    return threshold;
  }
  return Math.min(range.max, Math.max(range.min, threshold));
}

// Failure bookkeeping at the failure-mode threshold: a scene counts as
// failed when its F1 is below theta_f or undefined.
export type FailureSplit = {
  keptFailures: number;
  discardedFailures: number;
  totalFailures: number;
};

export function failureSplit(
  view: ReportView,
  threshold: number,
  thetaF: number,
): FailureSplit {
  const scores = view.report.scenes.map((s) => sceneScore(s, view.activeScore));
  const discard = flagAtThreshold(scores, threshold);
  let keptFailures = 0;
  let discardedFailures = 0;
  view.report.scenes.forEach((scene, i) => {
    const f1 = scene.metrics.f1;
    const failed = f1 === null || f1 === undefined || f1 < thetaF;
    if (!failed) return;
    if (discard[i]) {
      discardedFailures += 1;
    } else {
      keptFailures += 1;
    }
  });
  return {
    keptFailures,
    discardedFailures,
    totalFailures: keptFailures + discardedFailures,
  };
}

export function scoreNames(report: Report): string[] {
  return report.curves.map((c) => c.score_name);
}

export function createView(report: Report): ReportView {
  const names = scoreNames(report);
  const activeScore = names.includes("variance") ? "variance" : names[0] ?? "variance";
  const view: ReportView = {
    report,
    activeScore,
    threshold: 0,
    thetaF: defaultThetaF(report),
    sortColumn: "scene_id",
    sortDirection: "asc",
    selectedScene: null,
  };
  const range = scoreRange(view);
  view.threshold = range === null ? 0 : range.max;
  return view;
}

export function defaultThetaF(report: Report): number {
  const raw = report.run.config["failure_threshold"];
  return typeof raw === "number" ? raw : 0.5;
}
