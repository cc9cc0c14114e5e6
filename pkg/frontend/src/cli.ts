/**
 * Standalone renderer: each argument is a JSON figure spec
 * ({kind, input, output, title?, options?}); exits nonzero on any failure.
 */
import { readFileSync } from "node:fs";
import { pathToFileURL } from "node:url";

import { FigureSpec, render } from "./figures.js";

export function main(argv: string[]): number {
  if (argv.length === 0) {
    console.error("usage: blab-report <figure-spec.json> [...]");
    return 2;
  }
  let failed = false;
  for (const path of argv) {
    try {
      const spec = JSON.parse(readFileSync(path, "utf8")) as FigureSpec;
      console.log(render(spec));
    } catch (err) {
      console.error(`error: ${path}: ${err instanceof Error ? err.message : String(err)}`);
      failed = true;
    }
  }
  return failed ? 1 : 0;
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exitCode = main(process.argv.slice(2));
}
