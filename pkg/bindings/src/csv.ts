/**
 * Columnar <-> CSV marshalling. The synthesizer's process boundary speaks
 * RFC-4180 CSV with a header row; in-process we keep column-major arrays
 * (Float64Array for numeric columns, string[] for categorical ones).
 */

import Papa from "papaparse";

import { DomainDocument } from "./container.js";
import { ValidationError } from "./errors.js";

export type Column = Float64Array | number[] | string[];

export interface ColumnarTable {
  names: string[];
  columns: Column[];
}

export function tableToCsv(table: ColumnarTable): string {
  const { names, columns } = table;
  if (names.length !== columns.length) {
    throw new ValidationError(
      `got ${names.length} names but ${columns.length} columns`,
    );
  }
  const n = columns.length ? columns[0].length : 0;
  for (const [j, col] of columns.entries()) {
    if (col.length !== n) {
      throw new ValidationError(`column ${names[j]} has ragged length`);
    }
  }
  const rows: string[][] = new Array(n);
  for (let i = 0; i < n; i++) {
    const row = new Array<string>(columns.length);
    for (let j = 0; j < columns.length; j++) {
      const v = columns[j][i];
      row[j] = typeof v === "number" ? String(v) : v;
    }
    rows[i] = row;
  }
  return Papa.unparse({ fields: names, data: rows }, { newline: "\n" }) + "\n";
}

/** Parse CSV text into columns typed by the domain (numeric -> Float64Array). */
export function csvToTable(text: string, domain: DomainDocument): ColumnarTable {
  const parsed = Papa.parse<string[]>(text.trimEnd(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new ValidationError(`CSV parse error: ${parsed.errors[0].message}`);
  }
  const [header, ...rows] = parsed.data;
  if (!header) {
    throw new ValidationError("CSV is empty (missing header row)");
  }
  const kinds = new Map(domain.columns.map((c) => [c.name, c.kind]));
  const columns: Column[] = header.map((name, j) => {
    if (kinds.get(name) === "numerical") {
      const out = new Float64Array(rows.length);
      for (let i = 0; i < rows.length; i++) {
        const v = Number(rows[i][j]);
        if (Number.isNaN(v)) {
          throw new ValidationError(
            `column ${name}: ${rows[i][j]} is not a number`,
          );
        }
        out[i] = v;
      }
      return out;
    }
    return rows.map((r) => r[j]);
  });
  return { names: header, columns };
}
