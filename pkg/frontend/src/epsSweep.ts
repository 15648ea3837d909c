import { Table, cellNumber } from "./csv";
import { axes, caption, HEIGHT, legend, LegendEntry, PLOT, WIDTH } from "./frame";
import { linearScale, logScale, Scale } from "./scale";
import { document, px, tag } from "./svg";

export interface SweepOptions {
  logY?: boolean;
  caption?: string;
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

/** Robust bound against the ambiguity radius, one curve per K, with the
 * worst-case and in-sample levels as dashed references. */
export function renderEpsSweep(table: Table, options: SweepOptions = {}): string {
  // group rows by K in order of first appearance
  const groups = new Map<string, Record<string, string>[]>();
  for (const r of table.rows) {
    const g = groups.get(r["K"]);
    if (g) g.push(r);
    else groups.set(r["K"], [r]);
  }

  const epsilons: number[] = [];
  const values: number[] = [];
  for (const r of table.rows) {
    epsilons.push(cellNumber(r, "epsilon"));
    values.push(cellNumber(r, "dro_value"));
    values.push(cellNumber(r, "wc_bound"));
    values.push(cellNumber(r, "in_sample"));
  }
  const x = logScale(epsilons, PLOT.left, PLOT.right);
  const y: Scale = options.logY
    ? logScale(values, PLOT.bottom, PLOT.top)
    : linearScale(values, PLOT.bottom, PLOT.top);

  const body = axes(x, y, PLOT, "radius", "bound value");
  const entries: LegendEntry[] = [];
  let i = 0;
  for (const [k, rows] of groups) {
    const color = PALETTE[i % PALETTE.length];
    i += 1;
    const sorted = [...rows].sort((a, b) => cellNumber(a, "epsilon") - cellNumber(b, "epsilon"));
    // reference levels repeat per row within a K; draw each once
    for (const [column, dash] of [["wc_bound", "8 4"], ["in_sample", "2 3"]] as const) {
      const p = px(y.toPixel(cellNumber(sorted[0], column)));
      body.push(tag("line", {
        x1: PLOT.left, y1: p, x2: PLOT.right, y2: p,
        stroke: color, "stroke-dasharray": dash, "stroke-width": 1,
        "data-ref": column, "data-k": k, "data-value": sorted[0][column],
      }));
    }
    const pts = sorted.map((r) => ({
      cx: px(x.toPixel(cellNumber(r, "epsilon"))),
      cy: px(y.toPixel(cellNumber(r, "dro_value"))),
      eps: r["epsilon"],
      raw: r["dro_value"],
    }));
    if (pts.length > 1) {
      body.push(tag("polyline", {
        points: pts.map((p) => `${p.cx},${p.cy}`).join(" "),
        fill: "none", stroke: color, "stroke-width": 2,
      }));
    }
    for (const p of pts) {
      body.push(tag("circle", {
        cx: p.cx, cy: p.cy, r: 3, fill: color,
        "data-k": k, "data-epsilon": p.eps, "data-value": p.raw,
      }));
    }
    entries.push({ label: `K=${k}`, color, dash: "" });
  }
  entries.push({ label: "worst case", color: "#777", dash: "8 4" });
  entries.push({ label: "in-sample mean", color: "#777", dash: "2 3" });
  body.push(...legend(entries, PLOT.right - 10, PLOT.top + 10));
  body.push(...caption(options.caption, HEIGHT - 14));
  return document(WIDTH, HEIGHT, body);
}
