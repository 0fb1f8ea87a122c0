// Application shell: loads the report, owns the view state, and
// re-renders on every interaction. All threshold exploration happens
// client-side; the server is only read.

import { ReportLoadError, loadReport } from "./api.js";
import { nearestPointIndex, riskCoverageChart, decileScatter } from "./charts.js";
import { buildDecisionCsv } from "./csv.js";
import type { Curve, ReportView, SortColumn } from "./types.js";
import {
  clampThreshold,
  createView,
  failureSplit,
  recomputeRetained,
  sceneScore,
  scoreRange,
  thresholdForKeptCount,
} from "./whatif.js";
import { errorBanner, galleryTable, retainedPanel, sceneDetail } from "./views.js";

export type AppOptions = {
  baseUrl?: string;
  fetchFn?: typeof fetch;
  now?: () => Date;
};

export type AppHandle = {
  view: ReportView | null;
  render: () => void;
  destroy: () => void;
};

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

function activeCurve(view: ReportView): Curve | null {
  return view.report.curves.find((c) => c.score_name === view.activeScore) ?? null;
}

function describeLoadError(err: unknown): string {
  if (err instanceof ReportLoadError) {
    switch (err.kind) {
      case "network":
        return `The report server is unreachable. ${err.message}`;
      case "http":
        return `The report endpoint failed. ${err.message}`;
      case "parse":
        return `The report payload is not valid JSON. ${err.message}`;
      case "schema":
        return `The report has an unexpected shape. ${err.message}`;
    }
  }
  return String(err);
}

export async function initApp(
  root: HTMLElement,
  options: AppOptions = {},
): Promise<AppHandle> {
  const baseUrl = options.baseUrl ?? "";
  const now = options.now ?? (() => new Date());
  root.textContent = "loading report…";

  const controller = new AbortController();
  const abort = () => controller.abort();
  window.addEventListener("beforeunload", abort);

  const handle: AppHandle = {
    view: null,
    render: () => {},
    destroy: () => {
      window.removeEventListener("beforeunload", abort);
      window.removeEventListener("hashchange", onHashChange);
      controller.abort();
    },
  };

  const onHashChange = () => {
    if (handle.view === null) return;
    const match = /^#scene\/(.+)$/.exec(window.location.hash);
    const sceneId = match ? decodeURIComponent(match[1]) : null;
    if (sceneId !== handle.view.selectedScene) {
      handle.view.selectedScene = sceneId;
      handle.render();
    }
  };
  window.addEventListener("hashchange", onHashChange);

  let view: ReportView;
  try {
    const report = await loadReport(`${baseUrl}/api/report`, {
      signal: controller.signal,
      fetchFn: options.fetchFn,
    });
    view = createView(report);
  } catch (err) {
    if (err instanceof DOMException && err.name === "AbortError") {
      return handle;
    }
    root.replaceChildren(errorBanner(describeLoadError(err)));
    return handle;
  }
  handle.view = view;

  const match = /^#scene\/(.+)$/.exec(window.location.hash);
  if (match) view.selectedScene = decodeURIComponent(match[1]);

  const setThreshold = (value: number) => {
    view.threshold = clampThreshold(view, value);
    render();
  };

  const selectScene = (sceneId: string | null) => {
    view.selectedScene = sceneId;
    window.location.hash = sceneId === null ? "" : `#scene/${encodeURIComponent(sceneId)}`;
    render();
  };

  const onSort = (column: SortColumn) => {
    if (view.sortColumn === column) {
      view.sortDirection = view.sortDirection === "asc" ? "desc" : "asc";
    } else {
      view.sortColumn = column;
      view.sortDirection = "asc";
    }
    render();
  };

  const exportCsv = () => {
    const csv = buildDecisionCsv(view, view.threshold, view.thetaF, now);
    const blob = new Blob([csv], { type: "text/csv" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "decisions.csv";
    link.click();
    URL.revokeObjectURL(link.href);
  };

  function controls(): HTMLElement {
    const bar = el("div", "controls");

    const scoreField = el("label", "field", "score ");
    const scoreSelect = el("select");
    for (const curve of view.report.curves) {
      const option = el("option", undefined, curve.score_name);
      option.value = curve.score_name;
      option.selected = curve.score_name === view.activeScore;
      scoreSelect.appendChild(option);
    }
    scoreSelect.addEventListener("change", () => {
      view.activeScore = scoreSelect.value;
      view.threshold = clampThreshold(view, view.threshold);
      render();
    });
    scoreField.appendChild(scoreSelect);
    bar.appendChild(scoreField);

    const range = scoreRange(view);
    const thresholdField = el("label", "field", "threshold ");
    const slider = el("input");
    slider.type = "range";
    if (range !== null) {
      slider.min = String(range.min);
      slider.max = String(range.max);
      slider.step = String((range.max - range.min) / 300 || 1);
    }
    slider.value = String(view.threshold);
    slider.addEventListener("input", () => setThreshold(Number(slider.value)));
    thresholdField.appendChild(slider);
    const thresholdBox = el("input", "threshold-box");
    thresholdBox.type = "number";
    thresholdBox.step = "any";
    thresholdBox.value = String(view.threshold);
    thresholdBox.addEventListener("change", () => {
      const parsed = Number(thresholdBox.value);
      if (!Number.isNaN(parsed)) setThreshold(parsed);
    });
    thresholdField.appendChild(thresholdBox);
    bar.appendChild(thresholdField);

    const thetaField = el("label", "field", "failure threshold ");
    const theta = el("input");
    theta.type = "range";
    theta.min = "0";
    theta.max = "1";
    theta.step = "0.01";
    theta.value = String(view.thetaF);
    theta.addEventListener("input", () => {
      view.thetaF = Number(theta.value);
      render();
    });
    thetaField.appendChild(theta);
    thetaField.appendChild(el("span", "theta-value", view.thetaF.toFixed(2)));
    bar.appendChild(thetaField);

    const exportButton = el("button", "export-button", "export decisions CSV");
    exportButton.addEventListener("click", exportCsv);
    bar.appendChild(exportButton);
    return bar;
  }

  function render(): void {
    const retained = recomputeRetained(view, view.threshold);
    const failures = failureSplit(view, view.threshold, view.thetaF);

    root.replaceChildren();
    const header = el("header", "app-header");
    header.appendChild(el("h1", undefined, "segmentation reliability"));
    header.appendChild(
      el("span", "run-id", `seed ${String(view.report.run.seed)} · ${view.report.run.config_digest.slice(0, 12)}`),
    );
    root.appendChild(header);

    const selected = view.selectedScene;
    if (selected !== null) {
      const scene = view.report.scenes.find((s) => s.scene_id === selected);
      if (scene === undefined) {
        root.appendChild(errorBanner(`scene ${selected} is not in this report`));
      } else {
        const detail = sceneDetail(view, scene, baseUrl);
        const back = detail.querySelector("a.back-link");
        back?.addEventListener("click", (ev) => {
          ev.preventDefault();
          selectScene(null);
        });
        root.appendChild(detail);
        return;
      }
    }

    root.appendChild(controls());
    root.appendChild(retainedPanel(retained, failures, view.report.scenes.length));

    const chartsRow = el("div", "charts-row");
    const curve = activeCurve(view);
    if (curve !== null) {
      const markerIndex = retained.keptIds.length - 1;
      chartsRow.appendChild(
        riskCoverageChart(curve, markerIndex, (pointIndex) => {
          const t = thresholdForKeptCount(view, pointIndex + 1);
          if (t !== null) setThreshold(t);
        }),
      );
    }
    const grouping = view.report.groupings.find(
      (g) => g.score_name === view.activeScore,
    );
    if (grouping !== undefined) {
      const trend =
        view.report.trends.find(
          (t) => t.score_name === grouping.score_name && t.attribute === grouping.attribute,
        ) ?? null;
      chartsRow.appendChild(decileScatter(grouping, trend));
    }
    root.appendChild(chartsRow);

    root.appendChild(
      galleryTable(view, {
        onSelect: (sceneId) => selectScene(sceneId),
        onSort,
      }),
    );
  }

  handle.render = render;
  render();
  return handle;
}

export { recomputeRetained, sceneScore, nearestPointIndex };
