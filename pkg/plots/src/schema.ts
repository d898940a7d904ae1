import { readFileSync } from "node:fs";
import Papa from "papaparse";
import { z } from "zod";

/** Column layout of a sweep CSV (one row per regularization eps). */
export const SWEEP_COLUMNS = [
  "eps",
  "energy_lhs",
  "energy_rhs",
  "comparison_lhs",
  "comparison_rhs",
  "v_l2_sq",
  "sobolev_quantity",
  "sobolev_bound",
  "mollification_error",
  "time_derivative_lp",
  "time_derivative_rhs",
  "nikolskii_theta",
  "du_lp_p",
  "oldtrick_rhs",
  "newton_converged",
] as const;

export type SweepColumn = (typeof SWEEP_COLUMNS)[number];

// non-finite entries ("nan", "inf") become null: absent, not wrong
const numberish = z
  .string()
  .transform((raw) => {
    const v = Number(raw);
    return Number.isFinite(v) ? v : null;
  })
  .nullable();

const rowSchema = z.object(
  Object.fromEntries(SWEEP_COLUMNS.map((c) => [c, numberish])) as Record<
    SweepColumn,
    typeof numberish
  >,
);

export type SweepRow = Record<SweepColumn, number | null>;

export class SchemaError extends Error {}

/** Parse a sweep CSV; raises SchemaError naming any missing column.
 * A fully empty file parses to zero rows (rendered as a "no data" figure). */
export function loadSweepCsv(path: string): SweepRow[] {
  const text = readFileSync(path, "utf8");
  if (text.trim() === "") {
    return [];
  }
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`malformed CSV ${path}: ${parsed.errors[0].message}`);
  }
  const fields = parsed.meta.fields ?? [];
  const missing = SWEEP_COLUMNS.filter((c) => !fields.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(
      `CSV ${path} is missing required column(s): ${missing.join(", ")}`,
    );
  }
  return parsed.data.map((raw) => rowSchema.parse(raw) as SweepRow);
}

export interface SweepManifest {
  kind?: string;
  problem?: string;
  slope?: number | null;
  slope_flag?: string;
  slope_full?: number | null;
  slope_full_flag?: string;
  spread?: number | null;
  spread_flag?: string;
  ok?: boolean;
}

export function loadManifest(path: string): SweepManifest {
  return JSON.parse(readFileSync(path, "utf8")) as SweepManifest;
}
