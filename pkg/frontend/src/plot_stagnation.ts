/**
 * Stagnation figure for single-scale solver sweeps: error vs fine mesh width
 * with one line per eps and a vertical marker at h = eps for each series.
 *
 *   plot_stagnation --csv runs/paper-motivation.csv --out figure
 *       [--x h] [--y err_l2] [--series-by epsilon]
 *
 * Writes <out>.svg and <out>.png; exits nonzero on schema mismatch.
 */

import { readFileSync } from 'fs';
import { ParsedArgs, UsageError, parseArgs, required } from './args';
import { renderChart } from './chart';
import { CsvError, extractSeries, formatNumber, parseCsv } from './csv';
import { writeFigure } from './render';

const FLAGS = ['csv', 'out', 'x', 'y', 'series-by', 'title'];

export function buildStagnationSvg(csvText: string, parsed: ParsedArgs): string {
  const xColumn = parsed.flags['x'] ?? 'h';
  const yColumn = parsed.flags['y'] ?? 'err_l2';
  const seriesBy = parsed.flags['series-by'] ?? 'epsilon';
  const table = parseCsv(csvText);
  const series = extractSeries(table, xColumn, yColumn, seriesBy);
  const markers = series.map((s) => ({
    x: Number(s.key),
    label: `h = ${formatNumber(Number(s.key))}`,
  }));
  for (const marker of markers) {
    if (!Number.isFinite(marker.x) || marker.x <= 0) {
      throw new CsvError(`series column ${seriesBy} is not a positive eps value`);
    }
  }
  return renderChart(series, {
    title: parsed.flags['title'] ?? `${yColumn} vs ${xColumn} (stagnation until h < eps)`,
    xLabel: xColumn,
    yLabel: yColumn,
    verticalMarkers: markers,
  });
}

export function main(argv: string[]): number {
  try {
    const parsed = parseArgs(argv, FLAGS);
    const csvPath = required(parsed, 'csv');
    const outPath = required(parsed, 'out');
    const svg = buildStagnationSvg(readFileSync(csvPath, 'utf8'), parsed);
    const files = writeFigure(svg, outPath);
    console.log(`${files.svg}\n${files.png}`);
    return 0;
  } catch (err) {
    if (err instanceof UsageError || err instanceof CsvError) {
      console.error(`error: ${(err as Error).message}`);
      return 1;
    }
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
