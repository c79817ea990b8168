/** SVG/PNG file emission; PNG rasterizes the SVG with resvg. */

import { writeFileSync } from 'fs';
import * as path from 'path';

export interface WrittenFiles {
  svg: string;
  png: string;
}

export function writeFigure(svgText: string, outPath: string): WrittenFiles {
  const known = ['.svg', '.png'];
  const ext = path.extname(outPath).toLowerCase();
  const base = known.includes(ext) ? outPath.slice(0, -ext.length) : outPath;
  const svgPath = base + '.svg';
  const pngPath = base + '.png';
  writeFileSync(svgPath, svgText);
  // lazy import keeps --help and error paths free of the native module
  const { Resvg } = require('@resvg/resvg-js');
  const resvg = new Resvg(svgText, {
    font: { loadSystemFonts: true, defaultFontFamily: 'DejaVu Sans' },
  });
  writeFileSync(pngPath, resvg.render().asPng());
  return { svg: svgPath, png: pngPath };
}
