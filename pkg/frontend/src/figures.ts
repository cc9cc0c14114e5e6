/**
 * Figure builders over harness outputs.  Every figure is a pure function of
 * its input files; render() refuses to write anything when the inputs do not
 * match the expected schema.
 */
import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

import { CsvSchemaError, numericValue, parseReport, parseSigma, ReportRow } from "./csv.js";
import { linearFit } from "./fit.js";
import { fmt, heatmapPlot, linePlot, PALETTE, Series } from "./svg.js";

export type FigureKind = "decay" | "ratio-band" | "heatmap" | "sweep";

export interface FigureSpec {
  kind: FigureKind;
  input: string | string[];
  output: string;
  title?: string;
  options?: {
    metric?: string;
    mode?: string;
  };
}

const pow10 = (v: number) => fmt(10 ** v, 2);
const pow2 = (v: number) => fmt(2 ** v, 3);

function readInput(spec: FigureSpec): string {
  const inputs = Array.isArray(spec.input) ? spec.input : [spec.input];
  if (inputs.length === 0) throw new CsvSchemaError("figure spec has no input files");
  return readFileSync(inputs[0], "utf8");
}

function decayFigure(spec: FigureSpec): string {
  const sigma = parseSigma(readInput(spec)).filter((v) => v > 0);
  if (sigma.length < 2) throw new CsvSchemaError("need at least two positive singular values");
  const xs = sigma.map((_, i) => Math.log10(i + 1));
  const ys = sigma.map((v) => Math.log10(v));
  const fit = linearFit(xs, ys);
  const ends = [xs[0], xs[xs.length - 1]];
  const series: Series[] = [
    { label: "singular values", xs, ys, color: PALETTE[0] },
    {
      label: `fit slope ${fmt(fit.slope, 4)}`,
      xs: ends,
      ys: ends.map((x) => fit.intercept + fit.slope * x),
      color: PALETTE[1],
      dashed: true,
    },
  ];
  return linePlot(series, {
    title: spec.title ?? "singular value decay",
    xLabel: "index",
    yLabel: "sigma",
    xTickLabel: pow10,
    yTickLabel: pow10,
  });
}

function byResolution(rows: ReportRow[]): Map<number, ReportRow[]> {
  const groups = new Map<number, ReportRow[]>();
  for (const r of rows) {
    if (r.resolution === null) continue;
    const list = groups.get(r.resolution) ?? [];
    list.push(r);
    groups.set(r.resolution, list);
  }
  return groups;
}

function ratioBandFigure(spec: FigureSpec): string {
  const metric = spec.options?.metric ?? "ratio_schatten_besov";
  const rows = parseReport(readInput(spec)).filter(
    (r) => r.metric === metric && typeof r.value === "number" && Number.isFinite(r.value),
  );
  const groups = byResolution(rows);
  if (groups.size < 2) {
    throw new CsvSchemaError(`need "${metric}" rows at two or more resolutions`);
  }
  const resolutions = [...groups.keys()].sort((a, b) => a - b);
  const xs = resolutions.map((r) => Math.log2(r));
  const lo = resolutions.map((r) => Math.min(...groups.get(r)!.map(numericValue)));
  const hi = resolutions.map((r) => Math.max(...groups.get(r)!.map(numericValue)));
  const series: Series[] = [
    { label: "band max", xs, ys: hi, color: PALETTE[0] },
    { label: "band min", xs, ys: lo, color: PALETTE[2] },
  ];
  return linePlot(series, {
    title: spec.title ?? `${metric} band`,
    xLabel: "resolution",
    yLabel: "ratio",
    band: { xs, lo, hi },
    xTickLabel: pow2,
  });
}

function heatmapFigure(spec: FigureSpec): string {
  const mode = spec.options?.mode ?? "kernel";
  const rows = parseReport(readInput(spec)).filter(
    (r) => r.metric === "offset_max" && r.params.mode === mode,
  );
  if (rows.length === 0) throw new CsvSchemaError(`no offset_max rows for mode "${mode}"`);
  const offsets = [...new Set(rows.map((r) => Number(r.params.offset)))].sort((a, b) => a - b);
  const scales = [...new Set(rows.map((r) => r.resolution ?? 0))].sort((a, b) => a - b);
  const cells = scales.map((g) =>
    offsets.map((o) => {
      const row = rows.find((r) => (r.resolution ?? 0) === g && Number(r.params.offset) === o);
      if (!row) return NaN;
      const v = numericValue(row);
      return v > 0 ? Math.log2(v) : NaN;
    }),
  );
  return heatmapPlot(cells, {
    title: spec.title ?? `log2 max coefficient (${mode} mode)`,
    xLabel: "generation offset",
    yLabel: "scale",
    xTickLabels: offsets.map((o) => String(o)),
    yTickLabels: scales.map((g) => String(g)),
  });
}

function sweepFigure(spec: FigureSpec): string {
  const report = parseReport(readInput(spec));
  const rows = report.filter((r) => r.metric === "schatten" && r.resolution !== null);
  if (rows.length === 0) throw new CsvSchemaError('no "schatten" rows in the cutoff report');
  const verdicts = new Map<string, string>();
  for (const r of report) {
    if (r.metric === "verdict" && r.params.p !== undefined) {
      verdicts.set(r.params.p, String(r.value));
    }
  }
  const ps = [...new Set(rows.map((r) => r.params.p))].sort((a, b) => Number(a) - Number(b));
  const series: Series[] = ps.map((p, i) => {
    const mine = rows.filter((r) => r.params.p === p).sort((a, b) => a.resolution! - b.resolution!);
    const verdict = verdicts.get(p);
    return {
      label: `p=${p}${verdict ? ` (${verdict})` : ""}`,
      xs: mine.map((r) => Math.log2(r.resolution!)),
      ys: mine.map((r) => Math.log10(numericValue(r))),
      color: PALETTE[i % PALETTE.length],
    };
  });
  return linePlot(series, {
    title: spec.title ?? "Schatten norm under refinement",
    xLabel: "resolution",
    yLabel: "norm",
    xTickLabel: pow2,
    yTickLabel: pow10,
  });
}

const BUILDERS: Record<FigureKind, (spec: FigureSpec) => string> = {
  decay: decayFigure,
  "ratio-band": ratioBandFigure,
  heatmap: heatmapFigure,
  sweep: sweepFigure,
};

/** Pure figure construction: spec in, SVG text out; throws on schema problems. */
export function build(spec: FigureSpec): string {
  const builder = BUILDERS[spec.kind];
  if (!builder) throw new CsvSchemaError(`unknown figure kind "${spec.kind}"`);
  if (!spec.output) throw new CsvSchemaError("figure spec has no output path");
  return builder(spec);
}

/** Build and write; nothing is written when build() throws. */
export function render(spec: FigureSpec): string {
  const svg = build(spec);
  mkdirSync(dirname(spec.output), { recursive: true });
  writeFileSync(spec.output, svg, "utf8");
  return spec.output;
}
