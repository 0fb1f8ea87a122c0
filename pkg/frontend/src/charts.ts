// Hand-built SVG charts: the risk-coverage curve with a draggable
// coverage marker, and the decile-trend scatter. No chart library; the
// payloads are small and the marker interaction needs custom hit logic.

import type { Curve, Grouping, Trend } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export const CHART_WIDTH = 480;
export const CHART_HEIGHT = 300;
const MARGIN = { left: 52, right: 16, top: 16, bottom: 40 };

function svgElement<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, String(value));
  }
  return el;
}

function textEl(x: number, y: number, content: string, anchor = "middle"): SVGTextElement {
  const el = svgElement("text", { x, y, "text-anchor": anchor, class: "chart-label" });
  el.textContent = content;
  return el;
}

type Scale = (value: number) => number;

function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0;
  return (v) => (span === 0 ? (r0 + r1) / 2 : r0 + ((v - d0) / span) * (r1 - r0));
}

// Index of the curve point whose coverage is closest to the given value.
export function nearestPointIndex(curve: Curve, coverage: number): number {
  let best = 0;
  let bestDist = Infinity;
  curve.points.forEach((pt, i) => {
    const d = Math.abs(pt.coverage - coverage);
    if (d < bestDist) {
      bestDist = d;
      best = i;
    }
  });
  return best;
}

// Maps a pointer clientX into coverage space. jsdom reports a zero-size
// bounding rect, so fall back to the viewBox width there.
export function coverageFromClientX(svg: SVGSVGElement, curve: Curve, clientX: number): number {
  const rect = svg.getBoundingClientRect();
  const width = rect.width > 0 ? rect.width : CHART_WIDTH;
  const left = rect.left;
  const px = ((clientX - left) / width) * CHART_WIDTH;
  const c0 = curve.points[0]?.coverage ?? 0;
  const inner = linearScale(MARGIN.left, CHART_WIDTH - MARGIN.right, c0, 1.0);
  return inner(px);
}

export type MarkerCallback = (pointIndex: number) => void;

export function riskCoverageChart(
  curve: Curve,
  markerIndex: number,
  onMarkerMove?: MarkerCallback,
): SVGSVGElement {
  const svg = svgElement("svg", {
    viewBox: `0 0 ${CHART_WIDTH} ${CHART_HEIGHT}`,
    class: "chart risk-coverage-chart",
    role: "img",
  });
  const points = curve.points;
  const c0 = points[0]?.coverage ?? 0;
  const maxRisk = Math.max(0.05, ...points.map((p) => p.risk));
  const x = linearScale(c0, 1.0, MARGIN.left, CHART_WIDTH - MARGIN.right);
  const y = linearScale(0, maxRisk * 1.05, CHART_HEIGHT - MARGIN.bottom, MARGIN.top);

  svg.appendChild(
    svgElement("line", {
      x1: MARGIN.left,
      y1: CHART_HEIGHT - MARGIN.bottom,
      x2: CHART_WIDTH - MARGIN.right,
      y2: CHART_HEIGHT - MARGIN.bottom,
      class: "chart-axis",
    }),
  );
  svg.appendChild(
    svgElement("line", {
      x1: MARGIN.left,
      y1: MARGIN.top,
      x2: MARGIN.left,
      y2: CHART_HEIGHT - MARGIN.bottom,
      class: "chart-axis",
    }),
  );
  for (const tick of [c0, (c0 + 1) / 2, 1.0]) {
    svg.appendChild(textEl(x(tick), CHART_HEIGHT - MARGIN.bottom + 16, tick.toFixed(2)));
  }
  for (const tick of [0, maxRisk / 2, maxRisk]) {
    svg.appendChild(textEl(MARGIN.left - 6, y(tick) + 4, tick.toFixed(3), "end"));
  }
  svg.appendChild(textEl(CHART_WIDTH / 2, CHART_HEIGHT - 6, "coverage"));

  const polyline = svgElement("polyline", {
    points: points.map((p) => `${x(p.coverage)},${y(p.risk)}`).join(" "),
    class: "chart-line",
    fill: "none",
  });
  svg.appendChild(polyline);

  points.forEach((p, i) => {
    svg.appendChild(
      svgElement("circle", {
        cx: x(p.coverage),
        cy: y(p.risk),
        r: 2.5,
        class: "chart-point",
        "data-index": i,
      }),
    );
  });

  const marker = markerIndex >= 0 ? points[markerIndex] : undefined;
  if (marker !== undefined) {
    svg.appendChild(
      svgElement("circle", {
        cx: x(marker.coverage),
        cy: y(marker.risk),
        r: 6,
        class: "chart-marker",
      }),
    );
  }

  if (onMarkerMove) {
    let dragging = false;
    const moveTo = (clientX: number) => {
      const coverage = coverageFromClientX(svg, curve, clientX);
      onMarkerMove(nearestPointIndex(curve, coverage));
    };
    svg.addEventListener("pointerdown", (ev) => {
      dragging = true;
      moveTo(ev.clientX);
    });
    svg.addEventListener("pointermove", (ev) => {
      if (dragging) moveTo(ev.clientX);
    });
    const stop = () => {
      dragging = false;
    };
    svg.addEventListener("pointerup", stop);
    svg.addEventListener("pointerleave", stop);
  }
  return svg;
}

export function decileScatter(grouping: Grouping, trend: Trend | null): SVGSVGElement {
  const svg = svgElement("svg", {
    viewBox: `0 0 ${CHART_WIDTH} ${CHART_HEIGHT}`,
    class: "chart decile-scatter",
    role: "img",
  });
  const pairs = grouping.bins.filter(
    (b) => b.mean_score !== null && b.mean_f1 !== null,
  );
  if (pairs.length === 0) {
    svg.appendChild(textEl(CHART_WIDTH / 2, CHART_HEIGHT / 2, "no defined bins"));
    return svg;
  }
  const xs = pairs.map((b) => b.mean_score as number);
  const ys = pairs.map((b) => b.mean_f1 as number);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yLo = Math.min(...ys, 0);
  const yHi = Math.max(...ys, 1);
  const pad = (xHi - xLo) * 0.05 || 0.01;
  const x = linearScale(xLo - pad, xHi + pad, MARGIN.left, CHART_WIDTH - MARGIN.right);
  const y = linearScale(yLo, yHi, CHART_HEIGHT - MARGIN.bottom, MARGIN.top);

  svg.appendChild(
    svgElement("line", {
      x1: MARGIN.left,
      y1: CHART_HEIGHT - MARGIN.bottom,
      x2: CHART_WIDTH - MARGIN.right,
      y2: CHART_HEIGHT - MARGIN.bottom,
      class: "chart-axis",
    }),
  );
  svg.appendChild(
    svgElement("line", {
      x1: MARGIN.left,
      y1: MARGIN.top,
      x2: MARGIN.left,
      y2: CHART_HEIGHT - MARGIN.bottom,
      class: "chart-axis",
    }),
  );
  svg.appendChild(
    textEl(CHART_WIDTH / 2, CHART_HEIGHT - 6, `mean ${grouping.score_name} per decile`),
  );

  if (trend !== null && trend.slope !== null && trend.intercept !== null) {
    const lineY = (v: number) => trend.intercept! + trend.slope! * v;
    svg.appendChild(
      svgElement("line", {
        x1: x(xLo),
        y1: y(lineY(xLo)),
        x2: x(xHi),
        y2: y(lineY(xHi)),
        class: "chart-trend",
      }),
    );
    if (trend.pearson_r !== null) {
      svg.appendChild(
        textEl(CHART_WIDTH - MARGIN.right, MARGIN.top + 12, `r = ${trend.pearson_r.toFixed(3)}`, "end"),
      );
    }
  }

  for (const bin of pairs) {
    svg.appendChild(
      svgElement("circle", {
        cx: x(bin.mean_score as number),
        cy: y(bin.mean_f1 as number),
        r: 4,
        class: "chart-point",
        "data-bin": bin.index,
      }),
    );
  }
  return svg;
}
