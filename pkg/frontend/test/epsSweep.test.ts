import { join } from "path";
import { describe, expect, it } from "vitest";
import { readTable, SWEEP_COLUMNS } from "../src/csv";
import { renderEpsSweep } from "../src/epsSweep";

const FIXTURES = join(__dirname, "..", "fixtures");

const MARKER = /<circle [^>]*data-k="([^"]+)" data-epsilon="([^"]+)" data-value="([^"]+)"/g;
const REF = /<line [^>]*data-ref="([^"]+)" data-k="([^"]+)" data-value="([^"]+)"/g;

describe("renderEpsSweep", () => {
  const table = readTable(join(FIXTURES, "eps_sweep.csv"), SWEEP_COLUMNS);
  const svg = renderEpsSweep(table);
  const ks = [...new Set(table.rows.map((r) => r["K"]))];

  it("draws one curve and one reference pair per K", () => {
    expect(ks.length).toBeGreaterThan(1);
    expect((svg.match(/<polyline/g) ?? []).length).toBe(ks.length);
    const refs = [...svg.matchAll(REF)];
    expect(refs.length).toBe(2 * ks.length);
    for (const k of ks) {
      expect(svg).toContain(`>K=${k}</text>`);
    }
  });

  it("round-trips every swept value from the CSV unchanged", () => {
    const seen = new Map<string, string>();
    for (const m of svg.matchAll(MARKER)) seen.set(`${m[1]}@${m[2]}`, m[3]);
    for (const row of table.rows) {
      expect(seen.get(`${row["K"]}@${row["epsilon"]}`)).toBe(row["dro_value"]);
    }
  });

  it("round-trips the reference levels unchanged", () => {
    const seen = new Map<string, string>();
    for (const m of svg.matchAll(REF)) seen.set(`${m[1]}@${m[2]}`, m[3]);
    for (const row of table.rows) {
      expect(seen.get(`wc_bound@${row["K"]}`)).toBe(row["wc_bound"]);
      expect(seen.get(`in_sample@${row["K"]}`)).toBe(row["in_sample"]);
    }
  });

  it("keeps each curve inside its dashed reference band", () => {
    const refY = new Map<string, number>();
    for (const m of svg.matchAll(/<line [^>]*y1="([^"]+)"[^>]*data-ref="([^"]+)" data-k="([^"]+)"/g)) {
      refY.set(`${m[2]}@${m[3]}`, Number(m[1]));
    }
    for (const m of svg.matchAll(/<circle [^>]*cy="([^"]+)"[^>]*data-k="([^"]+)" data-epsilon/g)) {
      const cy = Number(m[1]);
      const top = refY.get(`wc_bound@${m[2]}`)!;
      const bottom = refY.get(`in_sample@${m[2]}`)!;
      // screen y grows downward; allow rounding slack
      expect(cy).toBeGreaterThanOrEqual(top - 0.51);
      expect(cy).toBeLessThanOrEqual(bottom + 0.51);
    }
  });

  it("supports a log value axis", () => {
    const logSvg = renderEpsSweep(table, { logY: true });
    expect(logSvg).toContain("<svg");
    expect([...logSvg.matchAll(MARKER)].length).toBe(table.rows.length);
  });
});
