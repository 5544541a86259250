/**
 * Training loop: MSE loss, Adam with the staged learning-rate schedule,
 * early stopping on the validation error, best-checkpoint saving.
 */

import * as fs from 'fs';
import * as path from 'path';

import * as tf from '@tensorflow/tfjs';

import { Sample, loadSplit, readManifest } from './dataset';
import { DEFAULT_CONFIG, TrainConfig, buildModel, scheduledRate, shouldStop } from './model';

export interface CheckpointMeta {
  tileSide: number;
  cubeHeight: number;
  cubeWidth: number;
  channels: number;
  /** per-tile-channel input normalization fitted on the training split */
  inputMean: number[];
  inputStd: number[];
  bestEpoch: number;
  bestValMse: number;
}

export interface TrainResult {
  trainLoss: number[];
  valMse: number[];
  stoppedEpoch: number;
  meta: CheckpointMeta;
}

/** Per-tile-channel mean and standard deviation over a sample set. */
export function inputMoments(samples: Sample[]): { mean: number[]; std: number[] } {
  const mean = new Array(9).fill(0);
  const std = new Array(9).fill(0);
  let perChannel = 0;
  for (const s of samples) {
    perChannel += s.input.length / 9;
    for (let i = 0; i < s.input.length; i++) {
      mean[i % 9] += s.input[i];
    }
  }
  for (let k = 0; k < 9; k++) {
    mean[k] /= perChannel;
  }
  for (const s of samples) {
    for (let i = 0; i < s.input.length; i++) {
      const d = s.input[i] - mean[i % 9];
      std[i % 9] += d * d;
    }
  }
  for (let k = 0; k < 9; k++) {
    std[k] = Math.sqrt(std[k] / perChannel) || 1;
  }
  return { mean, std };
}

export function normalizeInput(input: Float32Array, mean: number[],
                               std: number[]): Float32Array {
  const out = new Float32Array(input.length);
  for (let i = 0; i < input.length; i++) {
    out[i] = (input[i] - mean[i % 9]) / std[i % 9];
  }
  return out;
}

function toTensors(samples: Sample[], mean: number[],
                   std: number[]): { x: tf.Tensor4D; y: tf.Tensor4D } {
  const n = samples.length;
  const t = samples[0].tileSide;
  const { height, width, channels } = samples[0].cube;
  const xData = new Float32Array(n * t * t * 9);
  const yData = new Float32Array(n * height * width * channels);
  samples.forEach((s, i) => {
    xData.set(normalizeInput(s.input, mean, std), i * t * t * 9);
    yData.set(s.cube.data, i * height * width * channels);
  });
  return {
    x: tf.tensor4d(xData, [n, t, t, 9]),
    y: tf.tensor4d(yData, [n, height, width, channels]),
  };
}

function meanSquaredError(model: tf.LayersModel, x: tf.Tensor4D,
                          y: tf.Tensor4D): number {
  return tf.tidy(() => {
    const pred = model.predict(x) as tf.Tensor4D;
    return tf.losses.meanSquaredError(y, pred).dataSync()[0];
  });
}

async function saveCheckpoint(model: tf.LayersModel, meta: CheckpointMeta,
                              dir: string): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  await model.save(tf.io.withSaveHandler(async (artifacts) => {
    const weights = Buffer.from(artifacts.weightData as ArrayBuffer);
    fs.writeFileSync(path.join(dir, 'model.json'), JSON.stringify({
      modelTopology: artifacts.modelTopology,
      weightSpecs: artifacts.weightSpecs,
      weightDataBase64: weights.toString('base64'),
    }));
    return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } };
  }));
  fs.writeFileSync(path.join(dir, 'meta.json'), JSON.stringify(meta, null, 2));
}

export async function loadCheckpoint(dir: string):
    Promise<{ model: tf.LayersModel; meta: CheckpointMeta }> {
  const blob = JSON.parse(fs.readFileSync(path.join(dir, 'model.json'), 'utf8'));
  const weightData = Uint8Array.from(
    Buffer.from(blob.weightDataBase64, 'base64')).buffer;
  const model = await tf.loadLayersModel(tf.io.fromMemory({
    modelTopology: blob.modelTopology,
    weightSpecs: blob.weightSpecs,
    weightData,
  }));
  const meta = JSON.parse(
    fs.readFileSync(path.join(dir, 'meta.json'), 'utf8')) as CheckpointMeta;
  return { model, meta };
}

export async function train(manifestPath: string, checkpointDir: string,
                            overrides: Partial<TrainConfig> = {}):
    Promise<TrainResult> {
  const config: TrainConfig = { ...DEFAULT_CONFIG, ...overrides };
  const entries = readManifest(manifestPath);
  const trainSamples = loadSplit(entries, 'train');
  const valSamples = loadSplit(entries, 'val');

  const t = trainSamples[0].tileSide;
  const { height, width, channels } = trainSamples[0].cube;
  if (height !== width) {
    throw new Error('only square cubes are supported');
  }
  const model = buildModel(t, height, channels, config);
  const optimizer = tf.train.adam(config.learningRate);
  model.compile({ optimizer, loss: 'meanSquaredError' });

  const { mean, std } = inputMoments(trainSamples);
  const { x: trainX, y: trainY } = toTensors(trainSamples, mean, std);
  const { x: valX, y: valY } = toTensors(valSamples, mean, std);

  const stepsPerEpoch = Math.ceil(trainSamples.length / config.batchSize);
  const trainLoss: number[] = [];
  const valMse: number[] = [];
  let bestValMse = Infinity;
  let bestEpoch = -1;
  let stoppedEpoch = config.epochs - 1;

  await model.fit(trainX, trainY, {
    epochs: config.epochs,
    batchSize: config.batchSize,
    shuffle: true,
    verbose: 0,
    callbacks: {
      onEpochBegin: async (epoch) => {
        // tfjs keeps learningRate protected; mutating it between epochs is
        // the supported way to schedule without resetting Adam moments
        (optimizer as unknown as { learningRate: number }).learningRate =
          scheduledRate(config, epoch, epoch * stepsPerEpoch);
      },
      onEpochEnd: async (epoch, logs) => {
        trainLoss.push(logs?.loss as number);
        valMse.push(meanSquaredError(model, valX, valY));
        if (valMse[epoch] < bestValMse) {
          bestValMse = valMse[epoch];
          bestEpoch = epoch;
          await saveCheckpoint(model, {
            tileSide: t, cubeHeight: height, cubeWidth: width, channels,
            inputMean: mean, inputStd: std, bestEpoch, bestValMse,
          }, checkpointDir);
        }
        if (shouldStop(valMse, config.patience)) {
          stoppedEpoch = epoch;
          model.stopTraining = true;
        }
      },
    },
  });

  trainX.dispose();
  trainY.dispose();
  valX.dispose();
  valY.dispose();

  const meta = JSON.parse(fs.readFileSync(
    path.join(checkpointDir, 'meta.json'), 'utf8')) as CheckpointMeta;
  return { trainLoss, valMse, stoppedEpoch, meta };
}
