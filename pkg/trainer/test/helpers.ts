/**
 * Test scaffolding: the toy dataset is produced by the reconstruction
 * toolkit's own CLI, so every byte the trainer consumes crossed the real
 * interface (HCUB sources written here, HIMG/manifest written there).
 */

import { execFileSync } from 'child_process';
import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';

import { Cube, writeCube } from '../src/format';

// 16x16x8 cubes, 1-px dispersion shift, no skew orders: the frame has
// fewer informative pixels (1728) than the cube has voxels (2048), so a
// flat-start solver converges to a wrong cube while a learned prior picks
// a better one. That underdetermined regime is where a warm start pays
// off, mirroring the full-scale setup.
export const GEOMETRY_FLAGS = [
  '--x', '16', '--z', '8', '--b1', '2', '--b2', '0', '--shift', '1',
  '--sigma-psf', '0', '--all-orders', 'false',
];

export const CTISKIT = process.env.CTISKIT_BIN ?? 'ctiskit';

export function runCtiskit(args: string[]): string {
  return execFileSync(CTISKIT, args, { encoding: 'utf8' });
}

export function parseMse(metricsOutput: string): number {
  const match = /mse=([^\s]+)/.exec(metricsOutput);
  if (!match) {
    throw new Error(`no mse in: ${metricsOutput}`);
  }
  return match[1] === 'inf' ? Infinity : Number(match[1]);
}

/** Deterministic pseudo-random stream (mulberry32). */
export function randomStream(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** High-contrast random scene: per-pixel noise stretched to [0.05, 0.95],
 * times a per-source spectrum that varies mildly around 1. Rough scenes
 * carry plenty of energy the underdetermined frame cannot pin down, which
 * keeps the flat-start solver honest. */
export function randomScene(height: number, width: number, channels: number,
                            seed: number): Cube {
  const rand = randomStream(seed);
  const spatial = new Float64Array(height * width);
  let lo = Infinity;
  let hi = -Infinity;
  for (let i = 0; i < spatial.length; i++) {
    spatial[i] = rand();
    lo = Math.min(lo, spatial[i]);
    hi = Math.max(hi, spatial[i]);
  }
  const span = hi - lo;
  for (let i = 0; i < spatial.length; i++) {
    spatial[i] = span > 1e-12 ? 0.05 + 0.9 * (spatial[i] - lo) / span : 0.5;
  }
  const spectrum = Array.from({ length: channels }, () => 0.95 + 0.1 * rand());
  const data = new Float32Array(height * width * channels);
  for (let i = 0; i < height * width; i++) {
    for (let k = 0; k < channels; k++) {
      data[i * channels + k] = spatial[i] * spectrum[k];
    }
  }
  return { height, width, channels, data };
}

export interface ToyDataset {
  dir: string;
  manifestPath: string;
}

/** 4 sources x 16 crops = 64 samples of 16x16x8 cubes, noiseless frames. */
export function makeToyDataset(tag: string): ToyDataset {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), `trainer_${tag}_`));
  const srcDir = path.join(dir, 'sources');
  fs.mkdirSync(srcDir);
  const sources: string[] = [];
  for (let i = 0; i < 4; i++) {
    const source = path.join(srcDir, `scan${i}.hcub`);
    writeCube(randomScene(24, 28, 8, 1000 + i), source);
    sources.push(source);
  }
  const outDir = path.join(dir, 'data');
  runCtiskit([
    'dataset', '--sources', ...sources, '--out-dir', outDir,
    '--crops', '16', '--size', '16', ...GEOMETRY_FLAGS,
    '--noise', '0', '--seed', '7', '--noise-seed', '7',
  ]);
  return { dir, manifestPath: path.join(outDir, 'manifest.csv') };
}
