/**
 * Minimal deterministic log-log SVG charts: series with markers, slope-guide
 * reference lines, vertical markers, decade ticks with minor gridlines.
 */

import { Series, formatNumber } from './csv';

export interface SlopeGuide {
  order: number;
}

export interface VerticalMarker {
  x: number;
  label: string;
}

export interface ChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  width?: number;
  height?: number;
  slopeGuides?: SlopeGuide[];
  verticalMarkers?: VerticalMarker[];
}

const PALETTE = ['#1f6fb4', '#d95f02', '#2ca25f', '#756bb1', '#c51b8a', '#636363'];
const MARGIN = { left: 78, right: 24, top: 44, bottom: 58 };

const fmt = (v: number): string => v.toFixed(2);

function logRange(values: number[]): [number, number] {
  const positive = values.filter((v) => v > 0);
  if (positive.length === 0) {
    throw new Error('log-log chart needs positive data');
  }
  const lo = Math.min(...positive);
  const hi = Math.max(...positive);
  return [Math.log10(lo), Math.log10(hi)];
}

function pad([lo, hi]: [number, number], amount: number): [number, number] {
  if (hi - lo < 1e-12) return [lo - 0.5, hi + 0.5];
  return [lo - amount * (hi - lo), hi + amount * (hi - lo)];
}

export function renderChart(seriesList: Series[], options: ChartOptions): string {
  const width = options.width ?? 760;
  const height = options.height ?? 520;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const xs = seriesList.flatMap((s) => s.points.map((p) => p.x));
  const ys = seriesList.flatMap((s) => s.points.map((p) => p.y));
  for (const marker of options.verticalMarkers ?? []) xs.push(marker.x);
  const xRange = pad(logRange(xs), 0.06);
  const yRange = pad(logRange(ys), 0.08);

  const toX = (v: number) =>
    MARGIN.left + ((Math.log10(v) - xRange[0]) / (xRange[1] - xRange[0])) * plotW;
  const toY = (v: number) =>
    MARGIN.top + plotH - ((Math.log10(v) - yRange[0]) / (yRange[1] - yRange[0])) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="DejaVu Sans, sans-serif">`
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" ` +
      `fill="none" stroke="#333" stroke-width="1"/>`
  );
  parts.push(
    `<text x="${width / 2}" y="22" text-anchor="middle" font-size="15">${escapeXml(options.title)}</text>`
  );

  // decade ticks and minor gridlines
  for (const [axis, range] of [
    ['x', xRange],
    ['y', yRange],
  ] as const) {
    for (let d = Math.ceil(range[0] - 1e-9); d <= Math.floor(range[1] + 1e-9); d++) {
      const value = Math.pow(10, d);
      for (let mantissa = 1; mantissa < 10; mantissa++) {
        const v = mantissa * value;
        const lg = Math.log10(v);
        if (lg < range[0] - 1e-9 || lg > range[1] + 1e-9) continue;
        const major = mantissa === 1;
        if (axis === 'x') {
          const px = toX(v);
          parts.push(
            `<line x1="${fmt(px)}" y1="${MARGIN.top}" x2="${fmt(px)}" y2="${MARGIN.top + plotH}" ` +
              `stroke="${major ? '#bbb' : '#eee'}" stroke-width="1" class="grid-x"/>`
          );
          if (major) {
            parts.push(
              `<text x="${fmt(px)}" y="${MARGIN.top + plotH + 20}" text-anchor="middle" ` +
                `font-size="12" class="tick-x">1e${d}</text>`
            );
          }
        } else {
          const py = toY(v);
          parts.push(
            `<line x1="${MARGIN.left}" y1="${fmt(py)}" x2="${MARGIN.left + plotW}" y2="${fmt(py)}" ` +
              `stroke="${major ? '#bbb' : '#eee'}" stroke-width="1" class="grid-y"/>`
          );
          if (major) {
            parts.push(
              `<text x="${MARGIN.left - 8}" y="${fmt(py + 4)}" text-anchor="end" ` +
                `font-size="12" class="tick-y">1e${d}</text>`
            );
          }
        }
      }
    }
  }

  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${height - 14}" text-anchor="middle" ` +
      `font-size="13">${escapeXml(options.xLabel)}</text>`
  );
  parts.push(
    `<text x="20" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-size="13" ` +
      `transform="rotate(-90 20 ${MARGIN.top + plotH / 2})">${escapeXml(options.yLabel)}</text>`
  );

  // vertical markers (e.g. h = eps per series)
  for (const marker of options.verticalMarkers ?? []) {
    const px = toX(marker.x);
    parts.push(
      `<line x1="${fmt(px)}" y1="${MARGIN.top}" x2="${fmt(px)}" y2="${MARGIN.top + plotH}" ` +
        `stroke="#888" stroke-width="1.2" stroke-dasharray="6 4" class="vertical-marker"/>`
    );
    parts.push(
      `<text x="${fmt(px + 4)}" y="${MARGIN.top + 14}" font-size="11" fill="#555" ` +
        `class="vertical-marker-label">${escapeXml(marker.label)}</text>`
    );
  }

  // slope guides anchored to the lower-left of the data cloud
  const dataXs = seriesList.flatMap((s) => s.points.map((p) => p.x)).filter((v) => v > 0);
  const dataYs = seriesList.flatMap((s) => s.points.map((p) => p.y)).filter((v) => v > 0);
  const xMin = Math.min(...dataXs);
  const xMax = Math.max(...dataXs);
  const yMin = Math.min(...dataYs);
  for (const guide of options.slopeGuides ?? []) {
    const x0 = xMin;
    const x1 = Math.pow(10, Math.log10(xMin) + (Math.log10(xMax) - Math.log10(xMin)) * 0.45);
    const y0 = yMin * 0.6;
    const y1 = y0 * Math.pow(x1 / x0, guide.order);
    parts.push(
      `<line x1="${fmt(toX(x0))}" y1="${fmt(toY(y0))}" x2="${fmt(toX(x1))}" y2="${fmt(toY(y1))}" ` +
        `stroke="#444" stroke-width="1.4" stroke-dasharray="2 3" class="slope-guide" ` +
        `data-order="${guide.order}"/>`
    );
    parts.push(
      `<text x="${fmt(toX(x1) + 5)}" y="${fmt(toY(y1))}" font-size="11" fill="#444" ` +
        `class="slope-guide-label">slope ${guide.order}</text>`
    );
  }

  // data series
  seriesList.forEach((series, index) => {
    const color = PALETTE[index % PALETTE.length];
    const pts = series.points
      .filter((p) => p.x > 0 && p.y > 0)
      .map((p) => `${fmt(toX(p.x))},${fmt(toY(p.y))}`)
      .join(' ');
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.8" class="series" ` +
        `data-key="${escapeXml(series.key)}"/>`
    );
    for (const p of series.points) {
      if (p.x <= 0 || p.y <= 0) continue;
      parts.push(
        `<circle cx="${fmt(toX(p.x))}" cy="${fmt(toY(p.y))}" r="3.2" fill="${color}" class="marker"/>`
      );
    }
    const legendY = MARGIN.top + 16 + index * 17;
    parts.push(
      `<line x1="${width - MARGIN.right - 150}" y1="${legendY - 4}" ` +
        `x2="${width - MARGIN.right - 126}" y2="${legendY - 4}" stroke="${color}" stroke-width="2"/>`
    );
    parts.push(
      `<text x="${width - MARGIN.right - 120}" y="${legendY}" font-size="12" ` +
        `class="legend">${escapeXml(series.label)}</text>`
    );
  });

  parts.push('</svg>');
  return parts.join('\n') + '\n';
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export { formatNumber };
