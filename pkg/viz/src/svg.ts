/** Deterministic SVG assembly: fixed formatting, no ids, no timestamps. */

export function fmt(x: number): string {
  if (!Number.isFinite(x)) return "0";
  const s = x.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

export interface Scale {
  (v: number): number;
}

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  return (v) => r0 + ((v - d0) / span) * (r1 - r0);
}

export function logScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const l0 = Math.log10(d0);
  const l1 = Math.log10(d1);
  const span = l1 - l0 || 1;
  return (v) => r0 + ((Math.log10(v) - l0) / span) * (r1 - r0);
}

export class Svg {
  private parts: string[] = [];
  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  rect(x: number, y: number, w: number, h: number, fill: string, stroke = "none"): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}" stroke="${stroke}"/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, dash = ""): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}" stroke-width="${fmt(width)}"${d}/>`,
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1.5): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${fmt(width)}"/>`,
    );
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${fmt(r)}" fill="${fill}"/>`);
  }

  text(x: number, y: number, s: string, size = 11, anchor = "start", fill = "#222"): void {
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-family="monospace" font-size="${size}" text-anchor="${anchor}" fill="${fill}">${escapeXml(s)}</text>`,
    );
  }

  render(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">`,
      `<rect width="${this.width}" height="${this.height}" fill="#ffffff"/>`,
      ...this.parts,
      "</svg>",
      "",
    ].join("\n");
  }
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface Frame {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export const FRAME: Frame = { x0: 60, y0: 20, x1: 560, y1: 340 };

export function drawFrame(svg: Svg, f: Frame, xlabel: string, ylabel: string, title: string): void {
  svg.line(f.x0, f.y1, f.x1, f.y1, "#222", 1);
  svg.line(f.x0, f.y0, f.x0, f.y1, "#222", 1);
  if (title) svg.text((f.x0 + f.x1) / 2, f.y0 - 6, title, 12, "middle");
  svg.text((f.x0 + f.x1) / 2, f.y1 + 32, xlabel, 11, "middle");
  svg.text(16, (f.y0 + f.y1) / 2, ylabel, 11, "middle");
}

/** Round tick labels in scientific-ish short form, deterministic. */
export function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10000) {
    const s = v.toPrecision(3);
    return s.includes(".") ? s.replace(/\.?0+$/, "") : s;
  }
  return v.toExponential(1);
}
