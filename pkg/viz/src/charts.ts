/** The four figure kinds rendered from experiment outputs. */

import { readFileSync } from "node:fs";
import { numericColumns, parseCsv, SchemaError, Table } from "./csv.js";
import { readEnvFile } from "./envfile.js";
import { drawFrame, FRAME, linearScale, logScale, Svg, tickLabel } from "./svg.js";

export interface PlotSpec {
  kind: "convergence" | "tail-loglog" | "heatmap-env" | "stair-diagram";
  input: string;
  output: string;
  overlay?: string;
  xlabel?: string;
  ylabel?: string;
  title?: string;
}

export function render(spec: PlotSpec): string {
  switch (spec.kind) {
    case "convergence":
      return convergence(spec);
    case "tail-loglog":
      return tailLogLog(spec);
    case "heatmap-env":
      return heatmapEnv(spec);
    case "stair-diagram":
      return stairDiagram(spec);
    default:
      throw new SchemaError(`unknown plot kind '${(spec as PlotSpec).kind}'`);
  }
}

function loadTable(path: string): Table {
  return parseCsv(readFileSync(path, "utf8"));
}

/** Median error per radius from homog_error.csv, log-log curve. */
function convergence(spec: PlotSpec): string {
  const table = loadTable(spec.input);
  const cols = numericColumns(table, ["R", "err"]);
  const rs = cols.get("R")!;
  const errs = cols.get("err")!;
  const byR = new Map<number, number[]>();
  rs.forEach((r, i) => {
    if (!byR.has(r)) byR.set(r, []);
    byR.get(r)!.push(errs[i]);
  });
  const radii = [...byR.keys()].sort((a, b) => a - b);
  const med = radii.map((r) => median(byR.get(r)!));
  const svg = new Svg(600, 380);
  const f = FRAME;
  const floor = 1e-16;
  const ys = med.map((m) => Math.max(m, floor));
  const sx = logScale(radii[0], radii[radii.length - 1], f.x0, f.x1);
  const sy = logScale(Math.min(...ys), Math.max(...ys), f.y1, f.y0);
  drawFrame(svg, f, spec.xlabel ?? "R", spec.ylabel ?? "max |F_R - G|", spec.title ?? "");
  for (const r of radii) {
    svg.line(sx(r), f.y1, sx(r), f.y1 + 4, "#222");
    svg.text(sx(r), f.y1 + 16, tickLabel(r), 10, "middle");
  }
  for (const m of [Math.min(...ys), Math.max(...ys)]) {
    svg.text(f.x0 - 6, sy(m) + 4, tickLabel(m), 10, "end");
  }
  svg.polyline(radii.map((r, i) => [sx(r), sy(ys[i])] as [number, number]), "#b03030", 1.5);
  radii.forEach((r, i) => svg.circle(sx(r), sy(ys[i]), 3, "#b03030"));
  return svg.render();
}

/** dist_tail.csv points per C with a fitted guide slope. */
function tailLogLog(spec: PlotSpec): string {
  const table = loadTable(spec.input);
  const cols = numericColumns(table, ["bucket", "C", "p_hat", "ci_lo", "ci_hi"]);
  const buckets = cols.get("bucket")!;
  const cval = cols.get("C")!;
  const p = cols.get("p_hat")!;
  const series = new Map<number, Array<[number, number]>>();
  buckets.forEach((b, i) => {
    if (!series.has(cval[i])) series.set(cval[i], []);
    series.get(cval[i])!.push([b, p[i]]);
  });
  const svg = new Svg(600, 380);
  const f = FRAME;
  const allB = buckets.filter((_, i) => p[i] > 0);
  const allP = p.filter((v) => v > 0);
  if (allP.length === 0) throw new SchemaError("no positive tail values to plot");
  const sx = logScale(Math.min(...allB), Math.max(...allB), f.x0, f.x1);
  const sy = logScale(Math.min(...allP), Math.max(...allP) * 1.0 + 1e-12, f.y1, f.y0);
  drawFrame(svg, f, spec.xlabel ?? "|x-y|_1", spec.ylabel ?? "tail frequency", spec.title ?? "");
  const palette = ["#1f5fa8", "#b03030", "#2e7d32", "#7b1fa2"];
  let si = 0;
  for (const [c, pts] of [...series.entries()].sort((a, b) => a[0] - b[0])) {
    const color = palette[si % palette.length];
    const pos = pts.filter(([, v]) => v > 0);
    pos.forEach(([b, v]) => svg.circle(sx(b), sy(v), 3.5, color));
    svg.text(f.x1 - 4, f.y0 + 14 + 14 * si, `C=${tickLabel(c)}`, 10, "end", color);
    if (pos.length >= 2) {
      // least-squares slope in log-log coordinates, labeled as empirical
      const lx = pos.map(([b]) => Math.log10(b));
      const ly = pos.map(([, v]) => Math.log10(v));
      const n = lx.length;
      const mx = lx.reduce((a, b) => a + b, 0) / n;
      const my = ly.reduce((a, b) => a + b, 0) / n;
      let num = 0;
      let den = 0;
      for (let i = 0; i < n; i++) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) ** 2;
      }
      const slope = den > 0 ? num / den : 0;
      const b0 = Math.min(...pos.map(([b]) => b));
      const b1 = Math.max(...pos.map(([b]) => b));
      const at = (b: number) => Math.pow(10, my + slope * (Math.log10(b) - mx));
      svg.line(sx(b0), sy(at(b0)), sx(b1), sy(at(b1)), color, 1, "4 3");
      svg.text(
        f.x0 + 6,
        f.y0 + 14 + 14 * si,
        `empirical slope ${slope.toFixed(2)} (C=${tickLabel(c)})`,
        10,
        "start",
        color,
      );
    }
    si++;
  }
  for (const b of [...new Set(buckets)].sort((a, b) => a - b)) {
    svg.line(sx(b), f.y1, sx(b), f.y1 + 4, "#222");
    svg.text(sx(b), f.y1 + 16, tickLabel(b), 10, "middle");
  }
  return svg.render();
}

/** Orientation heatmap of a 2D environment file with a sink overlay. */
function heatmapEnv(spec: PlotSpec): string {
  const env = readEnvFile(spec.input);
  if (env.d !== 2) throw new SchemaError("heatmap-env needs a d=2 environment");
  const [nx, ny] = env.shape;
  const cell = Math.max(4, Math.floor(480 / Math.max(nx, ny)));
  const w = nx * cell + 80;
  const h = ny * cell + 60;
  const svg = new Svg(w, h);
  const ox = 50;
  const oy = 30;
  let sink: Set<string> | null = null;
  if (spec.overlay) {
    const t = loadTable(spec.overlay);
    const cols = numericColumns(t, ["x0", "x1", "sink"]);
    sink = new Set();
    const xs = cols.get("x0")!;
    const ys = cols.get("x1")!;
    const flags = cols.get("sink")!;
    xs.forEach((x, i) => {
      if (flags[i] > 0) sink!.add(`${x},${ys[i]}`);
    });
  }
  // horizontal sites warm, vertical sites cool; sink cells saturated
  for (let i = 0; i < nx; i++) {
    for (let j = 0; j < ny; j++) {
      const x = env.lo[0] + i;
      const y = env.lo[1] + j;
      const p0 = env.weights[(i * ny + j) * 2];
      const p1 = env.weights[(i * ny + j) * 2 + 1];
      const horizontal = p0 >= p1;
      const inSink = sink ? sink.has(`${x},${y}`) : true;
      let fill: string;
      if (horizontal) fill = inSink ? "#d9822b" : "#f3ddc3";
      else fill = inSink ? "#3a6ea8" : "#ccdcec";
      // svg y grows downward; lattice y grows upward
      svg.rect(ox + i * cell, oy + (ny - 1 - j) * cell, cell, cell, fill, "#ffffff");
    }
  }
  svg.text(ox, oy - 8, spec.title ?? `${env.law} seed=${env.seed}`, 12);
  if (sink) {
    svg.rect(ox, oy + ny * cell + 8, 10, 10, "#d9822b");
    svg.text(ox + 14, oy + ny * cell + 17, "horizontal / sink", 10);
    svg.rect(ox + 150, oy + ny * cell + 8, 10, 10, "#f3ddc3");
    svg.text(ox + 164, oy + ny * cell + 17, "outside sink", 10);
  }
  return svg.render();
}

/** ES/EN stair polylines with the enclosed bubble shaded. */
function stairDiagram(spec: PlotSpec): string {
  const table = loadTable(spec.input);
  const pathIdx = table.header.indexOf("path");
  if (pathIdx < 0) throw new SchemaError("missing column 'path'");
  const cols = numericColumns(table, ["x", "y"]);
  const xs = cols.get("x")!;
  const ys = cols.get("y")!;
  const kinds = table.rows.map((r) => r[pathIdx]);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const cell = Math.max(8, Math.min(28, Math.floor(440 / Math.max(maxX - minX + 1, maxY - minY + 1))));
  const ox = 50;
  const oy = 30;
  const w = (maxX - minX + 1) * cell + 100;
  const h = (maxY - minY + 1) * cell + 70;
  const svg = new Svg(w, h);
  const px = (x: number) => ox + (x - minX) * cell + cell / 2;
  const py = (y: number) => oy + (maxY - y) * cell + cell / 2;
  const seq = (kind: string): Array<[number, number]> =>
    table.rows
      .map((r, i) => ({ k: kinds[i], x: xs[i], y: ys[i] }))
      .filter((r) => r.k === kind)
      .map((r) => [px(r.x), py(r.y)] as [number, number]);
  for (const r of table.rows.map((_, i) => i).filter((i) => kinds[i] === "BUBBLE")) {
    svg.rect(px(xs[r]) - cell / 2, py(ys[r]) - cell / 2, cell, cell, "#e8e8d0");
  }
  // horizontal axis through the anchor line y=0
  svg.line(px(minX) - cell / 2, py(0), px(maxX) + cell / 2, py(0), "#999", 1, "3 3");
  const es = seq("ES");
  const en = seq("EN");
  if (es.length === 0 && en.length === 0) throw new SchemaError("no ES/EN rows in input");
  if (es.length) svg.polyline(es, "#b03030", 2);
  if (en.length) svg.polyline(en, "#1f5fa8", 2);
  if (es.length) svg.circle(es[0][0], es[0][1], 3.5, "#222");
  svg.text(ox, oy - 10, spec.title ?? "ES (red) and EN (blue) stairs with E-bubble", 12);
  return svg.render();
}

function median(v: number[]): number {
  const s = [...v].sort((a, b) => a - b);
  const m = s.length >> 1;
  return s.length % 2 ? s[m] : (s[m - 1] + s[m]) / 2;
}
