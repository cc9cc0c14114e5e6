import { existsSync, mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, describe, expect, it } from "vitest";

import { numericValue, parseReport } from "../src/csv.js";
import { build, FigureSpec, render } from "../src/figures.js";

const FIX = fileURLToPath(new URL("./fixtures", import.meta.url));
const fix = (...p: string[]) => join(FIX, ...p);
const tmp = mkdtempSync(join(tmpdir(), "blab-figures-"));
afterAll(() => rmSync(tmp, { recursive: true, force: true }));

function firstSeriesYs(svg: string): number[] {
  const m = svg.match(/<polyline class="series" points="([^"]+)"/);
  expect(m).not.toBeNull();
  return m![1].split(" ").map((pair) => Number(pair.split(",")[1]));
}

describe("decay figure", () => {
  it("renders the operator fixture and is byte-identical on rerun", () => {
    const spec: FigureSpec = {
      kind: "decay",
      input: fix("operator", "singular_values.csv"),
      output: join(tmp, "decay.svg"),
    };
    const out = render(spec);
    expect(out).toBe(spec.output);
    const first = readFileSync(out);
    expect(first.toString("utf8").startsWith("<svg")).toBe(true);
    expect(first.toString("utf8").endsWith("</svg>\n")).toBe(true);
    render(spec);
    expect(readFileSync(out).equals(first)).toBe(true);
  });

  it("draws a flat line with fit slope 0 for constant singular values", () => {
    const path = join(tmp, "flat.csv");
    writeFileSync(path, "sigma\n" + Array(12).fill("1.0").join("\n") + "\n");
    const svg = build({ kind: "decay", input: path, output: join(tmp, "flat.svg") });
    expect(svg).toContain("fit slope 0<");
    expect(new Set(firstSeriesYs(svg)).size).toBe(1);
  });
});

describe("ratio-band figure", () => {
  it("bands the schatten/besov ratio over resolutions", () => {
    const svg = build({
      kind: "ratio-band",
      input: fix("equivalence", "report.csv"),
      output: join(tmp, "band.svg"),
    });
    expect(svg).toContain("<polygon");
    expect(svg).toContain("band max");
    expect(svg).toContain("band min");
  });

  it("honours the metric option", () => {
    const svg = build({
      kind: "ratio-band",
      input: fix("equivalence", "report.csv"),
      output: join(tmp, "band2.svg"),
      options: { metric: "ratio_schatten_osc" },
    });
    expect(svg).toContain("ratio_schatten_osc band");
  });
});

describe("heatmap figure", () => {
  it("draws one cell per offset and scale", () => {
    const svg = build({
      kind: "heatmap",
      input: fix("nwo", "report.csv"),
      output: join(tmp, "heat.svg"),
    });
    expect(svg.match(/class="cell"/g) ?? []).toHaveLength(15);
  });

  it("selects the inverse mode on request", () => {
    const svg = build({
      kind: "heatmap",
      input: fix("nwo", "report.csv"),
      output: join(tmp, "heat-inv.svg"),
      options: { mode: "inverse" },
    });
    expect(svg).toContain("inverse mode");
    expect(svg.match(/class="cell"/g) ?? []).toHaveLength(15);
  });

  it("rejects a mode with no rows", () => {
    expect(() =>
      build({
        kind: "heatmap",
        input: fix("nwo", "report.csv"),
        output: join(tmp, "heat-bad.svg"),
        options: { mode: "sideways" },
      }),
    ).toThrow(/no offset_max rows/);
  });
});

describe("sweep figure", () => {
  it("labels each exponent with its verdict", () => {
    const svg = build({
      kind: "sweep",
      input: fix("cutoff", "report.csv"),
      output: join(tmp, "sweep.svg"),
    });
    expect(svg).toContain("p=0.7 (diverging)");
    expect(svg).toContain("p=2.0 (inconclusive)");
  });

  it("plots a rising norm for the diverging exponent", () => {
    const rows = parseReport(readFileSync(fix("cutoff", "report.csv"), "utf8"));
    const vals = rows
      .filter((r) => r.metric === "schatten" && r.params.p === "0.7")
      .sort((a, b) => a.resolution! - b.resolution!)
      .map((r) => numericValue(r));
    expect(vals).toHaveLength(4);
    for (let i = 1; i < vals.length; i++) {
      expect(vals[i]).toBeGreaterThan(vals[i - 1]);
    }
  });
});

describe("failure handling", () => {
  it("writes nothing when the input is empty", () => {
    const input = join(tmp, "empty.csv");
    writeFileSync(input, "");
    const output = join(tmp, "never.svg");
    expect(() => render({ kind: "decay", input, output })).toThrow(/empty CSV/);
    expect(existsSync(output)).toBe(false);
  });

  it("reports missing header columns", () => {
    const input = join(tmp, "bad-header.csv");
    writeFileSync(input, "experiment,params,metric,value\nx,,m,1\n");
    expect(() =>
      build({ kind: "ratio-band", input, output: join(tmp, "never2.svg") }),
    ).toThrow(/missing columns: resolution/);
  });

  it("rejects unknown figure kinds and missing outputs", () => {
    const input = fix("operator", "singular_values.csv");
    expect(() => build({ kind: "pie" as never, input, output: join(tmp, "x.svg") })).toThrow(
      /unknown figure kind/,
    );
    expect(() => build({ kind: "decay", input, output: "" })).toThrow(/no output path/);
  });

  it("escapes markup in titles", () => {
    const svg = build({
      kind: "decay",
      input: fix("operator", "singular_values.csv"),
      output: join(tmp, "esc.svg"),
      title: "decay <test> & co",
    });
    expect(svg).toContain("decay &lt;test&gt; &amp; co");
  });
});
