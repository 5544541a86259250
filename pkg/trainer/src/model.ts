/**
 * Tunnel-style convolutional predictor: the nine-tile stack narrows
 * through unpadded convolutions until the spatial size matches the cube,
 * with the spectral channels produced by the last layer.
 */

import * as tf from '@tensorflow/tfjs';

export interface TrainConfig {
  epochs: number;
  batchSize: number;
  /** initial learning rate; halved after the first stage, quartered after
   *  the second, then exponentially decayed */
  learningRate: number;
  /** epochs per constant-rate stage before the decaying tail */
  stageEpochs: number;
  /** multiplicative decay applied every decaySteps optimizer steps */
  decayRate: number;
  decaySteps: number;
  /** stop after this many epochs without validation improvement */
  patience: number;
  hiddenFilters: number;
}

export const DEFAULT_CONFIG: TrainConfig = {
  epochs: 20, // desk-scale default; production runs use hundreds
  batchSize: 32,
  learningRate: 4e-5,
  stageEpochs: 10,
  decayRate: 0.9,
  decaySteps: 50_000,
  patience: 5,
  hiddenFilters: 8,
};

/** Learning rate for a given epoch and global step. */
export function scheduledRate(config: TrainConfig, epoch: number,
                              step: number): number {
  if (epoch < config.stageEpochs) {
    return config.learningRate;
  }
  if (epoch < 2 * config.stageEpochs) {
    return config.learningRate / 2;
  }
  const base = config.learningRate / 4;
  return base * Math.pow(config.decayRate, Math.floor(step / config.decaySteps));
}

/** True once the validation error has not improved for `patience` epochs. */
export function shouldStop(valHistory: number[], patience: number): boolean {
  if (valHistory.length <= patience) {
    return false;
  }
  const best = Math.min(...valHistory.slice(0, valHistory.length - patience));
  return valHistory.slice(-patience).every((v) => v >= best);
}

/** Kernel sizes whose valid-padding reductions sum to tile - cube. */
export function kernelPlan(tileSide: number, cubeSide: number): number[] {
  let remaining = tileSide - cubeSide;
  if (remaining < 0) {
    throw new Error(
      `tile side ${tileSide} smaller than cube side ${cubeSide}`);
  }
  const kernels: number[] = [];
  while (remaining > 0) {
    const k = Math.min(remaining + 1, 5);
    kernels.push(k);
    remaining -= k - 1;
  }
  while (kernels.length < 2) {
    kernels.push(1); // keep at least one hidden layer plus the output layer
  }
  return kernels;
}

export function buildModel(tileSide: number, cubeSide: number,
                           channels: number, config: TrainConfig): tf.LayersModel {
  const kernels = kernelPlan(tileSide, cubeSide);
  const model = tf.sequential();
  kernels.forEach((kernelSize, i) => {
    const last = i === kernels.length - 1;
    // elu rather than relu: the sensor tiles are all-positive, and an
    // aggressive first stage can push relu units permanently dark
    model.add(tf.layers.conv2d({
      inputShape: i === 0 ? [tileSide, tileSide, 9] : undefined,
      filters: last ? channels : config.hiddenFilters,
      kernelSize,
      activation: last ? 'linear' : 'elu',
    }));
  });
  const out = model.outputShape as number[];
  if (out[1] !== cubeSide || out[2] !== cubeSide || out[3] !== channels) {
    throw new Error(`model output ${out} does not match cube `
      + `${cubeSide}x${cubeSide}x${channels}`);
  }
  return model;
}
