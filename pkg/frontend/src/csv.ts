/**
 * Strict reader for the solver's sweep CSV files.
 *
 * Expected header:
 *   run_id,example,epsilon,delta,sigma,H,h,tau,theta,err_l2,err_h1,err_triple,ehmm,wall_ms
 * Plot scripts are pure consumers of these files and never compute numerics.
 */

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

export class CsvError extends Error {}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new CsvError('CSV is empty');
  }
  const columns = lines[0].split(',');
  if (columns.length < 2) {
    throw new CsvError(`CSV header has ${columns.length} column(s); not a sweep file`);
  }
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(',');
    if (cells.length !== columns.length) {
      throw new CsvError(`row ${i + 2} has ${cells.length} cells, header has ${columns.length}`);
    }
    const row: Record<string, string> = {};
    columns.forEach((name, j) => (row[name] = cells[j]));
    return row;
  });
  return { columns, rows };
}

export function requireColumns(table: Table, names: string[]): void {
  const missing = names.filter((name) => !table.columns.includes(name));
  if (missing.length > 0) {
    throw new CsvError(
      `missing column(s) ${missing.join(', ')}; available: ${table.columns.join(', ')}`
    );
  }
}

/** Numeric values of one column; blank cells are dropped alongside their rows. */
export function numeric(row: Record<string, string>, column: string): number | null {
  const raw = row[column];
  if (raw === undefined || raw === '') return null;
  const value = Number(raw);
  if (!Number.isFinite(value)) {
    throw new CsvError(`column ${column} holds non-numeric value ${JSON.stringify(raw)}`);
  }
  return value;
}

export interface Series {
  label: string;
  key: string;
  points: { x: number; y: number }[];
}

/** Group (x, y) points by the value of `seriesBy`, sorted by x within a series. */
export function extractSeries(
  table: Table,
  xColumn: string,
  yColumn: string,
  seriesBy: string | null
): Series[] {
  const needed = seriesBy ? [xColumn, yColumn, seriesBy] : [xColumn, yColumn];
  requireColumns(table, needed);
  const groups = new Map<string, { x: number; y: number }[]>();
  for (const row of table.rows) {
    const x = numeric(row, xColumn);
    const y = numeric(row, yColumn);
    if (x === null || y === null) continue;
    const key = seriesBy ? row[seriesBy] : '';
    if (!groups.has(key)) groups.set(key, []);
    groups.get(key)!.push({ x, y });
  }
  const series = [...groups.entries()]
    .sort(([a], [b]) => (Number(a) || 0) - (Number(b) || 0) || a.localeCompare(b))
    .map(([key, points]) => ({
      key,
      label: seriesBy ? `${seriesBy}=${formatNumber(Number(key))}` : yColumn,
      points: points.sort((p, q) => p.x - q.x),
    }));
  if (series.length === 0 || series.every((s) => s.points.length === 0)) {
    throw new CsvError(`no plottable rows for ${yColumn} vs ${xColumn}`);
  }
  return series;
}

export function formatNumber(value: number): string {
  if (!Number.isFinite(value)) return String(value);
  if (value === 0) return '0';
  const magnitude = Math.abs(value);
  if (magnitude >= 0.01 && magnitude < 10000) {
    return String(Number(value.toPrecision(4)));
  }
  return value.toExponential(2).replace('e-', 'e-').replace('e+', 'e');
}
