import { existsSync, mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { tmpdir } from "node:os";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { render, PlotSpec } from "../src/charts.js";
import { SchemaError, parseCsv } from "../src/csv.js";

const here = dirname(fileURLToPath(import.meta.url));
const fix = (name: string) => join(here, "fixtures", name);
const golden = (name: string) => join(here, "golden", name);

const SPECS: Array<[string, PlotSpec]> = [
  [
    "convergence.svg",
    { kind: "convergence", input: fix("homog_error.csv"), output: "" },
  ],
  [
    "tail_loglog.svg",
    { kind: "tail-loglog", input: fix("dist_tail.csv"), output: "" },
  ],
  [
    "heatmap_env.svg",
    {
      kind: "heatmap-env",
      input: fix("sample.env"),
      overlay: fix("sink_sites.csv"),
      output: "",
    },
  ],
  [
    "stair_diagram.svg",
    { kind: "stair-diagram", input: fix("stair_path.csv"), output: "" },
  ],
];

describe("golden SVG rendering", () => {
  for (const [name, spec] of SPECS) {
    it(`renders ${spec.kind} byte-identical to ${name}`, () => {
      const svg = render(spec);
      expect(svg).toContain("<svg");
      const path = golden(name);
      if (process.env.REGEN_GOLDENS === "1" || !existsSync(path)) {
        mkdirSync(dirname(path), { recursive: true });
        writeFileSync(path, svg);
      }
      expect(svg).toBe(readFileSync(path, "utf8"));
    });
  }

  it("is a pure function of its inputs", () => {
    const a = render(SPECS[0][1]);
    const b = render(SPECS[0][1]);
    expect(a).toBe(b);
  });

  it("plots one point per bucket in the tail figure", () => {
    const table = parseCsv(readFileSync(fix("dist_tail.csv"), "utf8"));
    const buckets = new Set(table.rows.map((r) => r[0]));
    const svg = render(SPECS[1][1]);
    const circles = svg.match(/<circle /g) ?? [];
    expect(circles.length).toBe(buckets.size);
  });

  it("raises SchemaError naming a missing column", () => {
    const bad = join(tmpdir(), "rwre-viz-bad.csv");
    writeFileSync(bad, "a,b\n1,2\n");
    try {
      render({ kind: "convergence", input: bad, output: "" });
      throw new Error("expected SchemaError");
    } catch (e) {
      expect(e).toBeInstanceOf(SchemaError);
      expect((e as Error).message).toContain("'R'");
    }
  });

  it("rejects non-2d environment heatmaps", () => {
    expect(() =>
      render({ kind: "heatmap-env", input: fix("dist_tail.csv"), output: "" }),
    ).toThrow(SchemaError);
  });
});
