import { existsSync, mkdtempSync, readFileSync } from 'fs';
import { tmpdir } from 'os';
import * as path from 'path';
import { describe, expect, it } from 'vitest';
import { parseArgs } from '../src/args';
import { buildConvergenceSvg, main as convergenceMain } from '../src/plot_convergence';
import { buildStagnationSvg, main as stagnationMain } from '../src/plot_stagnation';

const FIXTURES = path.join(__dirname, '..', 'fixtures');
const CONVERGENCE_CSV = path.join(FIXTURES, 'example2-h-sweep.csv');
const MOTIVATION_CSV = path.join(FIXTURES, 'paper-motivation.csv');

const flagsOf = (pairs: Record<string, string>) =>
  parseArgs(
    Object.entries(pairs).flatMap(([k, v]) => [`--${k}`, v]),
    ['csv', 'out', 'x', 'y', 'series-by', 'slope-guides', 'title']
  );

describe('plot_convergence', () => {
  const csvText = readFileSync(CONVERGENCE_CSV, 'utf8');

  it('renders one series per cell width with a slope-2 guide', () => {
    const svg = buildConvergenceSvg(csvText, flagsOf({}));
    expect((svg.match(/class="series"/g) ?? []).length).toBe(2);
    expect(svg).toContain('data-order="2"');
    expect(svg).toContain('slope 2');
    expect(svg).toContain('class="grid-x"');
    expect(svg).toContain('err_l2');
  });

  it('supports a slope-1 guide for time sweeps', () => {
    const svg = buildConvergenceSvg(csvText, flagsOf({ 'slope-guides': '1', y: 'err_h1' }));
    expect(svg).toContain('data-order="1"');
    expect(svg).toContain('slope 1');
  });

  it('is deterministic', () => {
    const a = buildConvergenceSvg(csvText, flagsOf({}));
    const b = buildConvergenceSvg(csvText, flagsOf({}));
    expect(a).toBe(b);
  });

  it('fails with the available columns when err_l2 is missing', () => {
    expect(() =>
      buildConvergenceSvg('run_id,H,h\nx,0.5,0.1\n', flagsOf({}))
    ).toThrow(/missing column\(s\) err_l2; available: run_id, H, h/);
  });

  it('writes svg and png files through the CLI entry point', () => {
    const dir = mkdtempSync(path.join(tmpdir(), 'fehmm-plot-'));
    const out = path.join(dir, 'figure');
    const code = convergenceMain(['--csv', CONVERGENCE_CSV, '--out', out]);
    expect(code).toBe(0);
    expect(existsSync(out + '.svg')).toBe(true);
    expect(existsSync(out + '.png')).toBe(true);
    const png = readFileSync(out + '.png');
    expect(png.subarray(1, 4).toString()).toBe('PNG');
  });

  it('exits nonzero on schema mismatch', () => {
    const dir = mkdtempSync(path.join(tmpdir(), 'fehmm-plot-'));
    const bad = path.join(dir, 'bad.csv');
    require('fs').writeFileSync(bad, 'a,b\n1,2\n');
    expect(convergenceMain(['--csv', bad, '--out', path.join(dir, 'x')])).toBe(1);
    expect(convergenceMain(['--csv', path.join(dir, 'missing.csv'), '--out', 'x'])).toBe(2);
    expect(convergenceMain(['--bogus', '1'])).toBe(1);
  });
});

describe('plot_stagnation', () => {
  const csvText = readFileSync(MOTIVATION_CSV, 'utf8');

  it('renders per-eps series with vertical markers at h = eps', () => {
    const svg = buildStagnationSvg(csvText, flagsOf({}));
    expect((svg.match(/class="series"/g) ?? []).length).toBe(2); // eps in {0.05, 0.1}
    expect((svg.match(/class="vertical-marker"/g) ?? []).length).toBe(2);
    expect(svg).toContain('h = 0.05');
    expect(svg).toContain('h = 0.1');
  });

  it('single-series file gets a single marker', () => {
    const lines = csvText.trim().split('\n');
    const single = [lines[0], ...lines.slice(1).filter((l) => l.includes('motivation,0.05'))].join('\n') + '\n';
    const svg = buildStagnationSvg(single, flagsOf({}));
    expect((svg.match(/class="vertical-marker"/g) ?? []).length).toBe(1);
  });

  it('rejects an empty csv', () => {
    expect(() => buildStagnationSvg('', flagsOf({}))).toThrow(/empty/);
    expect(stagnationMain(['--csv', '/nonexistent.csv', '--out', 'x'])).toBe(2);
  });

  it('writes svg and png through the CLI entry point', () => {
    const dir = mkdtempSync(path.join(tmpdir(), 'fehmm-stag-'));
    const out = path.join(dir, 'stagnation.svg');
    const code = stagnationMain(['--csv', MOTIVATION_CSV, '--out', out]);
    expect(code).toBe(0);
    expect(existsSync(path.join(dir, 'stagnation.svg'))).toBe(true);
    expect(existsSync(path.join(dir, 'stagnation.png'))).toBe(true);
  });
});
