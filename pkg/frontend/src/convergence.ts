import { Table, cellNumber } from "./csv";
import { axes, caption, HEIGHT, legend, PLOT, WIDTH } from "./frame";
import { linearScale, logScale } from "./scale";
import { document, px, tag } from "./svg";

export interface ConvergenceOptions {
  caption?: string;
}

// solid lines for certified bounds, dashed for empirical values
export const CONVERGENCE_SERIES = [
  { column: "wc_bound", label: "worst case", color: "#1f77b4", dash: "" },
  { column: "dro_expect", label: "robust mean", color: "#d62728", dash: "" },
  { column: "dro_cvar", label: "robust CVaR", color: "#9467bd", dash: "" },
  { column: "emp_mean", label: "empirical mean", color: "#2ca02c", dash: "6 3" },
  { column: "emp_cvar", label: "empirical CVaR", color: "#ff7f0e", dash: "6 3" },
];

/** Semilog-y plot of every bound series against the iteration count. */
export function renderConvergence(table: Table, options: ConvergenceOptions = {}): string {
  const rows = [...table.rows].sort((a, b) => cellNumber(a, "K") - cellNumber(b, "K"));
  const ks = rows.map((r) => cellNumber(r, "K"));
  const values: number[] = [];
  for (const r of rows) {
    for (const s of CONVERGENCE_SERIES) values.push(cellNumber(r, s.column));
  }
  const x = linearScale(ks, PLOT.left, PLOT.right);
  const y = logScale(values, PLOT.bottom, PLOT.top);

  const body = axes(x, y, PLOT, "iterations K", "bound value");
  for (const s of CONVERGENCE_SERIES) {
    const pts = rows.map((r) => ({
      cx: px(x.toPixel(cellNumber(r, "K"))),
      cy: px(y.toPixel(cellNumber(r, s.column))),
      k: r["K"],
      raw: r[s.column],
    }));
    if (pts.length > 1) {
      const line: Record<string, string | number> = {
        points: pts.map((p) => `${p.cx},${p.cy}`).join(" "),
        fill: "none",
        stroke: s.color,
        "stroke-width": 2,
      };
      if (s.dash) line["stroke-dasharray"] = s.dash;
      body.push(tag("polyline", line));
    }
    for (const p of pts) {
      body.push(tag("circle", {
        cx: p.cx, cy: p.cy, r: 3, fill: s.color,
        "data-series": s.column, "data-k": p.k, "data-value": p.raw,
      }));
    }
  }
  body.push(...legend(
    CONVERGENCE_SERIES.map((s) => ({ label: s.label, color: s.color, dash: s.dash })),
    PLOT.right - 10, PLOT.top + 10));
  body.push(...caption(options.caption, HEIGHT - 14));
  return document(WIDTH, HEIGHT, body);
}
