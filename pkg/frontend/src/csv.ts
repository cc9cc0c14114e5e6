/**
 * Parsers for the two CSV schemas the experiment harness emits:
 * report tables (experiment,params,resolution,metric,value) and
 * singular value dumps (sigma).
 */

export class CsvSchemaError extends Error {}

/** Report values are numbers except for verdict rows, which hold labels. */
export type CellValue = number | string;

export interface ReportRow {
  experiment: string;
  params: Record<string, string>;
  resolution: number | null;
  metric: string;
  value: CellValue;
}

const REPORT_COLUMNS = ["experiment", "params", "resolution", "metric", "value"];
const REPORT_HEADER = REPORT_COLUMNS.join(",");

function lines(text: string): string[] {
  return text.split(/\r?\n/).filter((l) => l.length > 0);
}

function checkHeader(got: string, want: string[]): void {
  if (got === want.join(",")) return;
  const have = got.split(",");
  const missing = want.filter((c) => !have.includes(c));
  if (missing.length > 0) {
    throw new CsvSchemaError(`header mismatch; missing columns: ${missing.join(", ")}`);
  }
  throw new CsvSchemaError(`header mismatch; expected "${want.join(",")}", got "${got}"`);
}

/** "undefined" and the two infinities are legal values in report CSVs. */
export function parseValue(field: string): CellValue {
  if (field === "undefined") return NaN;
  if (field === "inf") return Infinity;
  if (field === "-inf") return -Infinity;
  if (field === "") throw new CsvSchemaError("empty value field");
  const v = Number(field);
  return Number.isNaN(v) ? field : v;
}

/** Numeric view of a value column entry; verdict strings are rejected. */
export function numericValue(row: ReportRow): number {
  if (typeof row.value !== "number") {
    throw new CsvSchemaError(`metric ${row.metric}: expected a number, got "${row.value}"`);
  }
  return row.value;
}

/** Split "a=1;b=x|y" into { a: "1", b: "x|y" }; values never contain commas. */
export function parseParams(field: string): Record<string, string> {
  const out: Record<string, string> = {};
  if (field === "") return out;
  for (const part of field.split(";")) {
    const eq = part.indexOf("=");
    if (eq <= 0) throw new CsvSchemaError(`bad params entry: "${part}"`);
    out[part.slice(0, eq)] = part.slice(eq + 1);
  }
  return out;
}

export function parseReport(text: string): ReportRow[] {
  const rows = lines(text);
  if (rows.length === 0) throw new CsvSchemaError("empty CSV");
  checkHeader(rows[0], REPORT_COLUMNS);
  if (rows.length === 1) throw new CsvSchemaError("report has a header but no rows");
  return rows.slice(1).map((line, i) => {
    const fields = line.split(",");
    if (fields.length !== REPORT_COLUMNS.length) {
      throw new CsvSchemaError(`row ${i + 2}: expected ${REPORT_COLUMNS.length} fields, got ${fields.length}`);
    }
    const [experiment, params, resolution, metric, value] = fields;
    return {
      experiment,
      params: parseParams(params),
      resolution: resolution === "" ? null : Number(resolution),
      metric,
      value: parseValue(value),
    };
  });
}

export function parseSigma(text: string): number[] {
  const rows = lines(text);
  if (rows.length === 0) throw new CsvSchemaError("empty CSV");
  checkHeader(rows[0], ["sigma"]);
  if (rows.length === 1) throw new CsvSchemaError("no singular values in file");
  return rows.slice(1).map((field, i) => {
    const v = parseValue(field);
    if (typeof v !== "number") throw new CsvSchemaError(`row ${i + 2}: bad sigma "${field}"`);
    return v;
  });
}

export { REPORT_HEADER };
