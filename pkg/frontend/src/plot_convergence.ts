/**
 * Log-log convergence figure from a sweep CSV.
 *
 *   plot_convergence --csv runs/convergence.csv --out figure
 *       [--x H] [--y err_l2] [--series-by h] [--slope-guides 2]
 *
 * Draws one line per value of --series-by with reference slope guides.
 * Writes <out>.svg and <out>.png; exits nonzero on schema mismatch.
 */

import { readFileSync } from 'fs';
import { ParsedArgs, UsageError, parseArgs, required } from './args';
import { renderChart } from './chart';
import { CsvError, extractSeries, parseCsv } from './csv';
import { writeFigure } from './render';

const FLAGS = ['csv', 'out', 'x', 'y', 'series-by', 'slope-guides', 'title'];

export function buildConvergenceSvg(csvText: string, parsed: ParsedArgs): string {
  const xColumn = parsed.flags['x'] ?? 'H';
  const yColumn = parsed.flags['y'] ?? 'err_l2';
  const seriesBy = parsed.flags['series-by'] ?? 'h';
  const guides = (parsed.flags['slope-guides'] ?? '2')
    .split(',')
    .filter((s) => s.length > 0)
    .map((s) => {
      const order = Number(s);
      if (!Number.isFinite(order)) throw new UsageError(`bad slope guide ${JSON.stringify(s)}`);
      return { order };
    });
  const table = parseCsv(csvText);
  const series = extractSeries(table, xColumn, yColumn, seriesBy);
  return renderChart(series, {
    title: parsed.flags['title'] ?? `${yColumn} vs ${xColumn}`,
    xLabel: xColumn,
    yLabel: yColumn,
    slopeGuides: guides,
  });
}

export function main(argv: string[]): number {
  try {
    const parsed = parseArgs(argv, FLAGS);
    const csvPath = required(parsed, 'csv');
    const outPath = required(parsed, 'out');
    const svg = buildConvergenceSvg(readFileSync(csvPath, 'utf8'), parsed);
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
