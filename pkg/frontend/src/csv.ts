import { readFileSync } from "fs";
import { parse } from "papaparse";

export const CONVERGENCE_COLUMNS = [
  "K",
  "wc_bound",
  "dro_expect",
  "dro_cvar",
  "emp_mean",
  "emp_cvar",
  "emp_max",
  "eps_expect",
  "eps_cvar",
  "solve_time_s",
];

export const SWEEP_COLUMNS = ["epsilon", "K", "dro_value", "wc_bound", "in_sample"];

export class SchemaError extends Error {}

export interface Table {
  columns: string[];
  // cells stay raw strings so plotted values round-trip unchanged
  rows: Record<string, string>[];
}

/** Parse a CSV file and check it against an expected header. */
export function readTable(path: string, expected: string[]): Table {
  const text = readFileSync(path, "utf8");
  const parsed = parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  const columns = parsed.meta.fields ?? [];
  const missing = expected.filter((c) => !columns.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(
      `missing columns ${missing.join(", ")} (expected header: ${expected.join(",")})`
    );
  }
  if (parsed.data.length === 0) {
    throw new SchemaError(
      `no data rows (expected header: ${expected.join(",")})`
    );
  }
  return { columns, rows: parsed.data };
}

/** Numeric view of one cell; the raw string is kept for display. */
export function cellNumber(row: Record<string, string>, column: string): number {
  const v = Number(row[column]);
  if (!Number.isFinite(v)) {
    throw new SchemaError(`column ${column} has non-numeric value "${row[column]}"`);
  }
  return v;
}
