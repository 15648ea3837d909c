import { Scale } from "./scale";
import { px, tag, text } from "./svg";

export interface Box {
  left: number;
  right: number;
  top: number;
  bottom: number;
}

export const WIDTH = 760;
export const HEIGHT = 480;
export const PLOT: Box = { left: 70, right: 730, top: 30, bottom: 410 };

export function axes(x: Scale, y: Scale, box: Box, xLabel: string, yLabel: string): string[] {
  const out: string[] = [];
  for (const t of x.ticks) {
    const p = px(x.toPixel(t.value));
    if (p < box.left - 0.5 || p > box.right + 0.5) continue;
    out.push(tag("line", { x1: p, y1: box.top, x2: p, y2: box.bottom, stroke: "#ddd" }));
    out.push(text(p - 10, box.bottom + 18, t.label, { fill: "#333" }));
  }
  for (const t of y.ticks) {
    const p = px(y.toPixel(t.value));
    if (p < box.top - 0.5 || p > box.bottom + 0.5) continue;
    out.push(tag("line", { x1: box.left, y1: p, x2: box.right, y2: p, stroke: "#ddd" }));
    out.push(text(box.left - 8, p + 4, t.label, { fill: "#333", "text-anchor": "end" }));
  }
  out.push(tag("rect", {
    x: box.left, y: box.top, width: box.right - box.left, height: box.bottom - box.top,
    fill: "none", stroke: "#333",
  }));
  out.push(text((box.left + box.right) / 2, box.bottom + 38, xLabel, { "text-anchor": "middle" }));
  out.push(text(16, (box.top + box.bottom) / 2, yLabel, {
    "text-anchor": "middle",
    transform: `rotate(-90 16 ${px((box.top + box.bottom) / 2)})`,
  }));
  return out;
}

export interface LegendEntry {
  label: string;
  color: string;
  dash: string;
}

export function legend(entries: LegendEntry[], xRight: number, yTop: number): string[] {
  const out: string[] = [];
  const w = 150;
  const lh = 18;
  const x0 = xRight - w;
  out.push(tag("rect", {
    x: x0, y: yTop, width: w, height: entries.length * lh + 8,
    fill: "white", stroke: "#999", opacity: 0.9,
  }));
  entries.forEach((e, i) => {
    const y = yTop + 13 + i * lh;
    const line: Record<string, string | number> = {
      x1: x0 + 8, y1: y, x2: x0 + 34, y2: y, stroke: e.color, "stroke-width": 2,
    };
    if (e.dash) line["stroke-dasharray"] = e.dash;
    out.push(tag("line", line));
    out.push(text(x0 + 40, y + 4, e.label));
  });
  return out;
}

export function caption(s: string | undefined, yBase: number): string[] {
  if (!s) return [];
  return [text(WIDTH / 2, yBase, s, { "text-anchor": "middle", "font-style": "italic", fill: "#444" })];
}
