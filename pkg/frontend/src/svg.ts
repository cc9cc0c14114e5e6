/**
 * Minimal deterministic SVG scenes: line plots with optional filled bands,
 * and annotated heatmaps.  No timestamps, no randomness, fixed styling;
 * identical inputs produce identical bytes.
 */

export interface Series {
  label: string;
  xs: number[];
  ys: number[];
  color: string;
  dashed?: boolean;
}

export interface Band {
  xs: number[];
  lo: number[];
  hi: number[];
}

export interface PlotOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  width?: number;
  height?: number;
  band?: Band;
  xTickLabel?: (v: number) => string;
  yTickLabel?: (v: number) => string;
}

export const PALETTE = ["#1f6feb", "#d1242f", "#2da44e", "#9a6700", "#8250df", "#bf3989"];

export function fmt(v: number, digits = 4): string {
  if (Number.isNaN(v)) return "nan";
  if (!Number.isFinite(v)) return v > 0 ? "inf" : "-inf";
  if (v === 0) return "0";
  return Number(v.toPrecision(digits)).toString();
}

const px = (v: number) => v.toFixed(2);

function range(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo > hi) throw new Error("no finite data to plot");
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const pad = 0.04 * (hi - lo);
  return [lo - pad, hi + pad];
}

function escape(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function linePlot(series: Series[], opts: PlotOptions): string {
  const width = opts.width ?? 640;
  const height = opts.height ?? 420;
  const m = { l: 68, r: 170, t: 36, b: 52 };
  const pw = width - m.l - m.r;
  const ph = height - m.t - m.b;
  const allX = series.flatMap((s) => s.xs).concat(opts.band ? opts.band.xs : []);
  const allY = series
    .flatMap((s) => s.ys)
    .concat(opts.band ? opts.band.lo.concat(opts.band.hi) : []);
  const [x0, x1] = range(allX);
  const [y0, y1] = range(allY);
  const toX = (v: number) => px(m.l + ((v - x0) / (x1 - x0)) * pw);
  const toY = (v: number) => px(m.t + ph - ((v - y0) / (y1 - y0)) * ph);
  const xtl = opts.xTickLabel ?? ((v: number) => fmt(v, 3));
  const ytl = opts.yTickLabel ?? ((v: number) => fmt(v, 3));

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="monospace" font-size="12">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="#ffffff"/>`);
  parts.push(`<text x="${px(width / 2)}" y="20" text-anchor="middle" font-size="14">${escape(opts.title)}</text>`);

  for (let i = 0; i < 4; i++) {
    const tx = x0 + (i / 3) * (x1 - x0);
    const gx = toX(tx);
    parts.push(`<line x1="${gx}" y1="${m.t}" x2="${gx}" y2="${m.t + ph}" stroke="#dddddd"/>`);
    parts.push(`<text x="${gx}" y="${m.t + ph + 18}" text-anchor="middle">${escape(xtl(tx))}</text>`);
    const ty = y0 + (i / 3) * (y1 - y0);
    const gy = toY(ty);
    parts.push(`<line x1="${m.l}" y1="${gy}" x2="${m.l + pw}" y2="${gy}" stroke="#dddddd"/>`);
    parts.push(`<text x="${m.l - 6}" y="${gy}" text-anchor="end" dominant-baseline="middle">${escape(ytl(ty))}</text>`);
  }
  parts.push(`<rect x="${m.l}" y="${m.t}" width="${pw}" height="${ph}" fill="none" stroke="#333333"/>`);
  parts.push(
    `<text x="${px(m.l + pw / 2)}" y="${height - 12}" text-anchor="middle">${escape(opts.xLabel)}</text>`,
  );
  parts.push(
    `<text x="16" y="${px(m.t + ph / 2)}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${px(m.t + ph / 2)})">${escape(opts.yLabel)}</text>`,
  );

  if (opts.band) {
    const fwd = opts.band.xs.map((v, i) => `${toX(v)},${toY(opts.band!.hi[i])}`);
    const back = opts.band.xs.map((v, i) => `${toX(v)},${toY(opts.band!.lo[i])}`).reverse();
    parts.push(`<polygon points="${fwd.concat(back).join(" ")}" fill="#1f6feb" fill-opacity="0.15"/>`);
  }

  series.forEach((s, idx) => {
    const pts = s.xs.map((v, i) => `${toX(v)},${toY(s.ys[i])}`).join(" ");
    const dash = s.dashed ? ' stroke-dasharray="6 4"' : "";
    parts.push(
      `<polyline class="series" points="${pts}" fill="none" stroke="${s.color}" stroke-width="1.5"${dash}/>`,
    );
    const ly = m.t + 10 + 16 * idx;
    parts.push(`<line x1="${m.l + pw + 10}" y1="${ly}" x2="${m.l + pw + 30}" y2="${ly}" stroke="${s.color}" stroke-width="1.5"${dash}/>`);
    parts.push(`<text x="${m.l + pw + 36}" y="${ly + 4}">${escape(s.label)}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

export interface HeatmapOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  xTickLabels: string[];
  yTickLabels: string[];
  width?: number;
  height?: number;
}

function shade(t: number): string {
  // white at 0 to a deep blue at 1
  const mix = (a: number, b: number) => Math.round(a + t * (b - a));
  return `rgb(${mix(255, 21)},${mix(255, 60)},${mix(255, 120)})`;
}

export function heatmapPlot(cells: number[][], opts: HeatmapOptions): string {
  const rows = cells.length;
  const cols = rows > 0 ? cells[0].length : 0;
  if (rows === 0 || cols === 0) throw new Error("no finite data to plot");
  const width = opts.width ?? 640;
  const height = opts.height ?? 420;
  const m = { l: 80, r: 30, t: 36, b: 52 };
  const pw = width - m.l - m.r;
  const ph = height - m.t - m.b;
  const finite = cells.flat().filter((v) => Number.isFinite(v));
  if (finite.length === 0) throw new Error("no finite data to plot");
  const lo = Math.min(...finite);
  const hi = Math.max(...finite);
  const span = hi > lo ? hi - lo : 1;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="monospace" font-size="12">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="#ffffff"/>`);
  parts.push(`<text x="${px(width / 2)}" y="20" text-anchor="middle" font-size="14">${escape(opts.title)}</text>`);
  const cw = pw / cols;
  const ch = ph / rows;
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      const v = cells[r][c];
      const x = m.l + c * cw;
      const y = m.t + r * ch;
      const fill = Number.isFinite(v) ? shade((v - lo) / span) : "#eeeeee";
      parts.push(
        `<rect class="cell" x="${px(x)}" y="${px(y)}" width="${px(cw)}" height="${px(ch)}" ` +
          `fill="${fill}" stroke="#ffffff"/>`,
      );
      const dark = Number.isFinite(v) && (v - lo) / span > 0.55;
      parts.push(
        `<text x="${px(x + cw / 2)}" y="${px(y + ch / 2 + 4)}" text-anchor="middle" ` +
          `fill="${dark ? "#ffffff" : "#333333"}">${Number.isFinite(v) ? fmt(v, 3) : "nan"}</text>`,
      );
    }
  }
  for (let c = 0; c < cols; c++) {
    parts.push(
      `<text x="${px(m.l + (c + 0.5) * cw)}" y="${m.t + ph + 18}" text-anchor="middle">` +
        `${escape(opts.xTickLabels[c] ?? "")}</text>`,
    );
  }
  for (let r = 0; r < rows; r++) {
    parts.push(
      `<text x="${m.l - 8}" y="${px(m.t + (r + 0.5) * ch + 4)}" text-anchor="end">` +
        `${escape(opts.yTickLabels[r] ?? "")}</text>`,
    );
  }
  parts.push(`<rect x="${m.l}" y="${m.t}" width="${pw}" height="${ph}" fill="none" stroke="#333333"/>`);
  parts.push(`<text x="${px(m.l + pw / 2)}" y="${height - 12}" text-anchor="middle">${escape(opts.xLabel)}</text>`);
  parts.push(
    `<text x="16" y="${px(m.t + ph / 2)}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${px(m.t + ph / 2)})">${escape(opts.yLabel)}</text>`,
  );
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
