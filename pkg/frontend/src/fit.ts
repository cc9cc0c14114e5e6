/** Least-squares trend lines, matching the harness's degree-1 polynomial fits. */

export interface LinearFit {
  slope: number;
  intercept: number;
}

export function linearFit(xs: number[], ys: number[]): LinearFit {
  if (xs.length !== ys.length || xs.length < 2) {
    throw new Error("fit needs at least two points");
  }
  const n = xs.length;
  let mx = 0;
  let my = 0;
  for (let i = 0; i < n; i++) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    const dx = xs[i] - mx;
    sxx += dx * dx;
    sxy += dx * (ys[i] - my);
  }
  if (sxx === 0) throw new Error("fit needs distinct x values");
  const slope = sxy / sxx;
  return { slope, intercept: my - slope * mx };
}

/**
 * Slope of log2(value) against offset over the positive entries,
 * exactly the quantity the harness stores in its "slope" rows.
 */
export function decaySlope(offsets: number[], values: number[]): number {
  if (offsets.length !== values.length) throw new Error("offset/value length mismatch");
  const keep = offsets
    .map((o, i) => ({ o, v: values[i] }))
    .filter(({ v }) => v > 0)
    .sort((a, b) => a.o - b.o);
  if (keep.length < 2) throw new Error("not enough positive values for a decay fit");
  return linearFit(
    keep.map(({ o }) => o),
    keep.map(({ v }) => Math.log2(v)),
  ).slope;
}
