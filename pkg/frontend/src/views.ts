// DOM builders for the dashboard views. Each function returns a detached
// element; main.ts owns composition and state. Nothing here mutates the
// report payload.

import { heatmapUrl } from "./api.js";
import type { ReportView, Scene, SortColumn } from "./types.js";
import {
  FailureSplit,
  RetainedMetrics,
  flagAtThreshold,
  sceneScore,
} from "./whatif.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function errorBanner(message: string): HTMLElement {
  const banner = el("div", "error-banner");
  banner.setAttribute("role", "alert");
  banner.appendChild(el("strong", undefined, "Could not load the report. "));
  banner.appendChild(el("span", undefined, message));
  return banner;
}

export function formatNumber(value: number | null | undefined, digits = 4): string {
  if (value === null || value === undefined) return "n/a";
  if (!Number.isFinite(value)) return String(value);
  const abs = Math.abs(value);
  if (abs !== 0 && (abs >= 10000 || abs < 0.0001)) {
    return value.toExponential(2);
  }
  return value.toFixed(digits);
}

export function retainedPanel(
  metrics: RetainedMetrics,
  failures: FailureSplit,
  totalScenes: number,
): HTMLElement {
  const panel = el("div", "retained-panel");
  const rows: [string, string][] = [
    ["coverage", formatNumber(metrics.coverage, 3)],
    ["kept scenes", `${metrics.keptIds.length} / ${totalScenes}`],
    ["retained mean F1", formatNumber(metrics.meanF1)],
    ["retained risk", formatNumber(metrics.risk)],
    ["failures kept", `${failures.keptFailures} of ${failures.totalFailures}`],
  ];
  for (const [label, value] of rows) {
    const item = el("div", "retained-item");
    item.appendChild(el("span", "retained-label", label));
    item.appendChild(el("span", "retained-value", value));
    panel.appendChild(item);
  }
  return panel;
}

export function compareScenes(
  a: Scene,
  b: Scene,
  column: SortColumn,
  direction: "asc" | "desc",
): number {
  const byId = a.scene_id < b.scene_id ? -1 : a.scene_id > b.scene_id ? 1 : 0;
  if (column === "scene_id") {
    return direction === "desc" ? -byId : byId;
  }
  const va = (column === "f1" ? a.metrics.f1 : sceneScore(a, column)) ?? null;
  const vb = (column === "f1" ? b.metrics.f1 : sceneScore(b, column)) ?? null;
  // missing values sort last regardless of direction
  if (va === null || vb === null) {
    if (va === null && vb === null) return byId;
    return va === null ? 1 : -1;
  }
  if (va === vb) return byId;
  const result = va - vb;
  return direction === "desc" ? -result : result;
}

export function sortedScenes(view: ReportView): Scene[] {
  const scenes = [...view.report.scenes];
  scenes.sort((a, b) => compareScenes(a, b, view.sortColumn, view.sortDirection));
  return scenes;
}

export type GalleryHandlers = {
  onSelect: (sceneId: string) => void;
  onSort: (column: SortColumn) => void;
};

export function galleryTable(view: ReportView, handlers: GalleryHandlers): HTMLElement {
  const wrap = el("div", "gallery");
  const table = el("table", "gallery-table");
  const thead = el("thead");
  const headRow = el("tr");
  const columns: SortColumn[] = [
    "scene_id",
    ...view.report.curves.map((c) => c.score_name),
    "f1",
  ];
  for (const column of columns) {
    const th = el("th", undefined, column);
    th.dataset.column = column;
    if (column === view.sortColumn) {
      th.classList.add("sorted");
      th.textContent = `${column} ${view.sortDirection === "asc" ? "▲" : "▼"}`;
    }
    th.addEventListener("click", () => handlers.onSort(column));
    headRow.appendChild(th);
  }
  headRow.appendChild(el("th", undefined, "decision"));
  headRow.appendChild(el("th", undefined, "flags"));
  thead.appendChild(headRow);
  table.appendChild(thead);

  const scenes = sortedScenes(view);
  const discard = flagAtThreshold(
    scenes.map((s) => sceneScore(s, view.activeScore)),
    view.threshold,
  );
  const tbody = el("tbody");
  scenes.forEach((scene, i) => {
    const tr = el("tr");
    tr.dataset.sceneId = scene.scene_id;
    if (scene.scene_id === view.selectedScene) tr.classList.add("selected");
    const f1 = scene.metrics.f1;
    if (f1 === null || f1 === undefined || f1 < view.thetaF) {
      tr.classList.add("failed");
    }
    tr.appendChild(el("td", "scene-id", scene.scene_id));
    for (const curve of view.report.curves) {
      tr.appendChild(el("td", "num", formatNumber(sceneScore(scene, curve.score_name))));
    }
    tr.appendChild(el("td", "num", formatNumber(f1 ?? null)));
    tr.appendChild(
      el("td", discard[i] ? "decision discard" : "decision keep",
        discard[i] ? "discard" : "keep"),
    );
    tr.appendChild(el("td", "flags", scene.flags.join("; ")));
    tr.addEventListener("click", () => handlers.onSelect(scene.scene_id));
    tbody.appendChild(tr);
  });
  table.appendChild(tbody);
  wrap.appendChild(table);
  return wrap;
}

function heatmapFigure(baseUrl: string, sceneId: string, metric: string): HTMLElement {
  const figure = el("figure", "heatmap-figure");
  const img = el("img", "heatmap-img");
  img.alt = `${metric} heatmap for ${sceneId}`;
  img.src = heatmapUrl(baseUrl, sceneId, metric);
  img.addEventListener("error", () => {
    const missing = el("div", "heatmap-missing", `${metric} heatmap unavailable`);
    img.replaceWith(missing);
  });
  figure.appendChild(img);
  figure.appendChild(el("figcaption", undefined, metric));
  return figure;
}

function keyValueTable(title: string, entries: [string, string][]): HTMLElement {
  const section = el("section", "detail-section");
  section.appendChild(el("h3", undefined, title));
  const table = el("table", "kv-table");
  for (const [key, value] of entries) {
    const tr = el("tr");
    tr.appendChild(el("td", "kv-key", key));
    tr.appendChild(el("td", "kv-value", value));
    table.appendChild(tr);
  }
  section.appendChild(table);
  return section;
}

export function sceneDetail(view: ReportView, scene: Scene, baseUrl: string): HTMLElement {
  const detail = el("div", "scene-detail");
  const header = el("div", "detail-header");
  header.appendChild(el("h2", undefined, scene.scene_id));
  const back = el("a", "back-link", "back to gallery");
  back.href = "#";
  header.appendChild(back);
  detail.appendChild(header);

  if (scene.flags.length > 0) {
    const flags = el("div", "detail-flags");
    for (const flag of scene.flags) {
      flags.appendChild(el("span", "flag-chip", flag));
    }
    detail.appendChild(flags);
  }

  const maps = el("div", "heatmap-row");
  maps.appendChild(heatmapFigure(baseUrl, scene.scene_id, "mean_prob"));
  maps.appendChild(heatmapFigure(baseUrl, scene.scene_id, "variance"));
  detail.appendChild(maps);

  detail.appendChild(
    keyValueTable(
      "scores",
      Object.entries(scene.scores).map(([k, v]) => [k, formatNumber(v)]),
    ),
  );
  detail.appendChild(
    keyValueTable(
      "metrics",
      Object.entries(scene.metrics).map(([k, v]) => [
        k,
        typeof v === "boolean" ? String(v) : formatNumber(v as number | null),
      ]),
    ),
  );
  detail.appendChild(
    keyValueTable(
      "attributes",
      Object.entries(scene.attributes).map(([k, v]) => [k, formatNumber(v)]),
    ),
  );
  return detail;
}
