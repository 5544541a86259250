/**
 * Manifest-driven sample loading: each sample pairs a sensor image,
 * pre-split into its nine tiles stacked as channels, with the target cube.
 */

import * as fs from 'fs';
import * as path from 'path';

import { Cube, Image, readCube, readImage } from './format';

export interface ManifestEntry {
  id: string;
  source: string;
  row: number;
  col: number;
  split: 'train' | 'val' | 'test' | 'unseen';
  cubePath: string;
  imagePath: string;
}

const MANIFEST_HEADER = 'id,source,row,col,split,cube_path,image_path';

export function readManifest(manifestPath: string): ManifestEntry[] {
  const text = fs.readFileSync(manifestPath, 'utf8');
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines[0] !== MANIFEST_HEADER) {
    throw new Error(`${manifestPath}: unexpected manifest header`);
  }
  const base = path.dirname(manifestPath);
  return lines.slice(1).map((line) => {
    const cols = line.split(',');
    if (cols.length !== 7) {
      throw new Error(`${manifestPath}: malformed row: ${line}`);
    }
    const resolve = (p: string) =>
      path.isAbsolute(p) ? p : path.resolve(base, '..', p);
    return {
      id: cols[0],
      source: cols[1],
      row: Number(cols[2]),
      col: Number(cols[3]),
      split: cols[4] as ManifestEntry['split'],
      cubePath: resolve(cols[5]),
      imagePath: resolve(cols[6]),
    };
  });
}

/**
 * Stack the row-major 3x3 tiles of a square image as nine channels:
 * output[(r*t + c)*9 + k] is pixel (r, c) of tile k.
 */
export function tileStack(image: Image): { tileSide: number; data: Float32Array } {
  if (image.side % 3 !== 0) {
    throw new Error(`image side ${image.side} is not divisible by 3`);
  }
  const t = image.side / 3;
  const out = new Float32Array(t * t * 9);
  for (let k = 0; k < 9; k++) {
    const tr = Math.floor(k / 3) * t;
    const tc = (k % 3) * t;
    for (let r = 0; r < t; r++) {
      for (let c = 0; c < t; c++) {
        out[(r * t + c) * 9 + k] = image.data[(tr + r) * image.side + tc + c];
      }
    }
  }
  return { tileSide: t, data: out };
}

export interface Sample {
  entry: ManifestEntry;
  tileSide: number;
  /** (tileSide, tileSide, 9) channels last */
  input: Float32Array;
  cube: Cube;
}

export function loadSample(entry: ManifestEntry): Sample {
  const image = readImage(entry.imagePath);
  const cube = readCube(entry.cubePath);
  const { tileSide, data } = tileStack(image);
  return { entry, tileSide, input: data, cube };
}

export function loadSplit(entries: ManifestEntry[],
                          split: ManifestEntry['split']): Sample[] {
  const samples = entries.filter((e) => e.split === split).map(loadSample);
  if (samples.length === 0) {
    throw new Error(`no samples in split "${split}"`);
  }
  const first = samples[0];
  for (const s of samples) {
    if (s.tileSide !== first.tileSide
        || s.cube.height !== first.cube.height
        || s.cube.width !== first.cube.width
        || s.cube.channels !== first.cube.channels) {
      throw new Error(`sample ${s.entry.id} has inconsistent dimensions`);
    }
  }
  return samples;
}
