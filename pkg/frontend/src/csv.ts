// Decision-list export: one row per scene with the keep/discard call at
// the current thresholds. Built to be reimportable, so fields that could
// contain separators are quoted and the parser understands the quoting.

import type { ReportView } from "./types.js";
import { flagAtThreshold, sceneScore } from "./whatif.js";

export const DECISION_HEADER = [
  "scene_id",
  "score",
  "decision",
  "threshold",
  "theta_f",
  "timestamp",
] as const;

export type DecisionRow = {
  sceneId: string;
  score: number | null;
  decision: "keep" | "discard";
  threshold: number;
  thetaF: number;
  timestamp: string;
};

function quoteField(value: string): string {
  if (/[",\n\r]/.test(value)) {
    return `"${value.replaceAll('"', '""')}"`;
  }
  return value;
}

export function buildDecisionCsv(
  view: ReportView,
  threshold: number,
  thetaF: number,
  now: () => Date = () => new Date(),
): string {
  const timestamp = now().toISOString();
  const scores = view.report.scenes.map((s) => sceneScore(s, view.activeScore));
  const discard = flagAtThreshold(scores, threshold);
  const lines = [DECISION_HEADER.join(",")];
  view.report.scenes.forEach((scene, i) => {
    const score = scores[i];
    lines.push(
      [
        quoteField(scene.scene_id),
        score === null ? "" : String(score),
        discard[i] ? "discard" : "keep",
        String(threshold),
        String(thetaF),
        timestamp,
      ].join(","),
    );
  });
  return lines.join("\n") + "\n";
}

function splitCsvLine(line: string): string[] {
  const fields: string[] = [];
  let current = "";
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"') {
        if (line[i + 1] === '"') {
          current += '"';
          i += 1;
        } else {
          quoted = false;
        }
      } else {
        current += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      fields.push(current);
      current = "";
    } else {
      current += ch;
    }
  }
  fields.push(current);
  return fields;
}

export function parseDecisionCsv(text: string): DecisionRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error("empty decision CSV");
  }
  if (lines[0] !== DECISION_HEADER.join(",")) {
    throw new Error(`unexpected header: ${lines[0]}`);
  }
  return lines.slice(1).map((line) => {
    const fields = splitCsvLine(line);
    if (fields.length !== DECISION_HEADER.length) {
      throw new Error(`row has ${fields.length} fields: ${line}`);
    }
    const decision = fields[2];
    if (decision !== "keep" && decision !== "discard") {
      throw new Error(`unknown decision: ${decision}`);
    }
    return {
      sceneId: fields[0],
      score: fields[1] === "" ? null : Number(fields[1]),
      decision,
      threshold: Number(fields[3]),
      thetaF: Number(fields[4]),
      timestamp: fields[5],
    };
  });
}
