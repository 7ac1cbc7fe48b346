/** Reader for the RWRE-ENV v1 environment file format. */

import { readFileSync } from "node:fs";
import { SchemaError } from "./csv.js";

export interface EnvFile {
  d: number;
  lo: number[];
  hi: number[];
  law: string;
  seed: number;
  /** weights[siteIndex][axis], sites row-major over the box */
  weights: Float64Array;
  shape: number[];
}

export function readEnvFile(path: string): EnvFile {
  const buf = readFileSync(path);
  let offset = 0;
  const line = (): string => {
    const nl = buf.indexOf(0x0a, offset);
    if (nl < 0) throw new SchemaError("truncated header");
    const s = buf.subarray(offset, nl).toString("ascii");
    offset = nl + 1;
    return s;
  };
  if (line() !== "RWRE-ENV v1") throw new SchemaError("bad magic");
  const d = Number(expect(line(), "d"));
  const [loS, hiS] = expect(line(), "box").split(":");
  const lo = loS.split(",").map(Number);
  const hi = hiS.split(",").map(Number);
  const law = expect(line(), "law");
  const seed = Number(expect(line(), "seed"));
  const shape = lo.map((l, i) => hi[i] - l + 1);
  const sites = shape.reduce((a, b) => a * b, 1);
  const payload = buf.subarray(offset);
  if (payload.length !== sites * d * 8) {
    throw new SchemaError(
      `payload is ${payload.length} bytes, expected ${sites * d * 8}`,
    );
  }
  const weights = new Float64Array(sites * d);
  for (let i = 0; i < weights.length; i++) {
    weights[i] = payload.readDoubleLE(i * 8);
  }
  return { d, lo, hi, law, seed, weights, shape };
}

function expect(lineText: string, key: string): string {
  if (!lineText.startsWith(key + "=")) {
    throw new SchemaError(`expected '${key}=' line, got '${lineText}'`);
  }
  return lineText.slice(key.length + 1);
}
