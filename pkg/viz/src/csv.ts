/** Minimal CSV reading for the experiment outputs (no quoting needed). */

export class SchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaError";
  }
}

export interface Table {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new SchemaError("empty CSV");
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  return { header, rows };
}

/** Column values as numbers; throws SchemaError naming a missing column. */
export function numericColumns(table: Table, names: string[]): Map<string, number[]> {
  const out = new Map<string, number[]>();
  for (const name of names) {
    const idx = table.header.indexOf(name);
    if (idx < 0) throw new SchemaError(`missing column '${name}'`);
    out.set(
      name,
      table.rows.map((r) => Number(r[idx])),
    );
  }
  return out;
}
