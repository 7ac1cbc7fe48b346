#!/usr/bin/env node
/** viz <kind> <input> -o <svg> [--overlay csv] [--title ..] [--xlabel ..] [--ylabel ..] */

import { writeFileSync } from "node:fs";
import { PlotSpec, render } from "./charts.js";
import { SchemaError } from "./csv.js";

const KINDS = ["convergence", "tail-loglog", "heatmap-env", "stair-diagram"] as const;

export function main(argv: string[]): number {
  const args = [...argv];
  const kind = args.shift();
  const input = args.shift();
  if (!kind || !input || !(KINDS as readonly string[]).includes(kind)) {
    process.stderr.write(
      `usage: viz <${KINDS.join("|")}> <input> -o <out.svg> [--overlay csv] [--title t] [--xlabel x] [--ylabel y]\n`,
    );
    return 1;
  }
  const spec: PlotSpec = { kind: kind as PlotSpec["kind"], input, output: "out.svg" };
  while (args.length) {
    const flag = args.shift()!;
    const value = args.shift();
    if (value === undefined) {
      process.stderr.write(`missing value for ${flag}\n`);
      return 1;
    }
    if (flag === "-o" || flag === "--output") spec.output = value;
    else if (flag === "--overlay") spec.overlay = value;
    else if (flag === "--title") spec.title = value;
    else if (flag === "--xlabel") spec.xlabel = value;
    else if (flag === "--ylabel") spec.ylabel = value;
    else {
      process.stderr.write(`unknown flag ${flag}\n`);
      return 1;
    }
  }
  try {
    writeFileSync(spec.output, render(spec));
  } catch (e) {
    if (e instanceof SchemaError) {
      process.stderr.write(`schema error: ${e.message}\n`);
      return 1;
    }
    if (e instanceof Error && "code" in e && (e as NodeJS.ErrnoException).code === "ENOENT") {
      process.stderr.write(`file not found: ${(e as NodeJS.ErrnoException).path}\n`);
      return 1;
    }
    throw e;
  }
  process.stdout.write(spec.output + "\n");
  return 0;
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
