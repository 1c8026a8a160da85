// Minimal SVG line charts. Input is a step/value series straight off
// the telemetry log; the only arithmetic here is coordinate mapping.

import type { Series } from "./monitor.js";

export function fmtNum(v: number | null | undefined, digits = 4): string {
  if (v === null || v === undefined || Number.isNaN(v)) return "–";
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e6 || a < 1e-4) return v.toExponential(2);
  return String(Number(v.toPrecision(digits)));
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export interface ChartOptions {
  width?: number;
  height?: number;
  title?: string;
}

const PAD = { left: 46, right: 14, top: 22, bottom: 20 };

export function chartSvg(s: Series, opts: ChartOptions = {}): string {
  const width = opts.width ?? 420;
  const height = opts.height ?? 180;
  const title = opts.title ?? "";
  const head =
    `<svg viewBox="0 0 ${width} ${height}" role="img" class="chart" ` +
    `preserveAspectRatio="xMidYMid meet">` +
    (title ? `<text x="${PAD.left}" y="14" class="chart-title">${esc(title)}</text>` : "");
  if (s.steps.length === 0) {
    return `${head}<text x="${width / 2}" y="${height / 2}" class="chart-empty" text-anchor="middle">waiting for telemetry</text></svg>`;
  }

  const innerW = width - PAD.left - PAD.right;
  const innerH = height - PAD.top - PAD.bottom;
  const x0 = s.steps[0];
  const x1 = s.steps[s.steps.length - 1];
  let y0 = Math.min(...s.values);
  let y1 = Math.max(...s.values);
  if (y0 === y1) {
    // flat series still needs a visible band
    const pad = y0 === 0 ? 1 : Math.abs(y0) * 0.05;
    y0 -= pad;
    y1 += pad;
  }
  const sx = (step: number) => PAD.left + (x1 === x0 ? innerW / 2 : ((step - x0) / (x1 - x0)) * innerW);
  const sy = (v: number) => PAD.top + (1 - (v - y0) / (y1 - y0)) * innerH;

  const parts: string[] = [head];
  for (const frac of [0, 0.5, 1]) {
    const v = y0 + frac * (y1 - y0);
    const y = sy(v);
    parts.push(
      `<line x1="${PAD.left}" y1="${y}" x2="${width - PAD.right}" y2="${y}" class="chart-grid"/>`,
      `<text x="${PAD.left - 6}" y="${y + 3}" text-anchor="end" class="chart-tick">${fmtNum(v, 3)}</text>`,
    );
  }
  parts.push(
    `<text x="${PAD.left}" y="${height - 6}" class="chart-tick">${fmtNum(x0, 6)}</text>`,
    `<text x="${width - PAD.right}" y="${height - 6}" text-anchor="end" class="chart-tick">${fmtNum(x1, 6)}</text>`,
  );

  const points = s.steps.map((step, i) => `${sx(step).toFixed(1)},${sy(s.values[i]).toFixed(1)}`);
  if (points.length > 1) {
    parts.push(`<polyline fill="none" class="chart-line" points="${points.join(" ")}"/>`);
  }
  const lastX = sx(s.steps[s.steps.length - 1]);
  const lastY = sy(s.values[s.values.length - 1]);
  parts.push(
    `<circle cx="${lastX.toFixed(1)}" cy="${lastY.toFixed(1)}" r="3" class="chart-dot"/>`,
    `</svg>`,
  );
  return parts.join("");
}
