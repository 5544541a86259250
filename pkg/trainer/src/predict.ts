/**
 * Inference: sensor image file in, non-negative cube file out. The output
 * is the hybrid hand-off artifact that warm-starts the iterative solver.
 */

import * as tf from '@tensorflow/tfjs';

import { readImage, writeCube } from './format';
import { tileStack } from './dataset';
import { CheckpointMeta, loadCheckpoint, normalizeInput } from './train';

export async function predictToFile(checkpointDir: string, imagePath: string,
                                    outPath: string): Promise<CheckpointMeta> {
  const { model, meta } = await loadCheckpoint(checkpointDir);
  try {
    predictWithModel(model, meta, imagePath, outPath);
  } finally {
    model.dispose();
  }
  return meta;
}

export function predictWithModel(model: tf.LayersModel, meta: CheckpointMeta,
                                 imagePath: string, outPath: string): void {
  const image = readImage(imagePath);
  const { tileSide, data } = tileStack(image);
  if (tileSide !== meta.tileSide) {
    throw new Error(`image tiles are ${tileSide} px but the checkpoint `
      + `expects ${meta.tileSide}`);
  }
  const normalized = normalizeInput(data, meta.inputMean, meta.inputStd);
  const out = tf.tidy(() => {
    const x = tf.tensor4d(normalized, [1, tileSide, tileSide, 9]);
    const y = model.predict(x) as tf.Tensor4D;
    return tf.relu(y); // the solver requires a non-negative initializer
  });
  const values = out.dataSync() as Float32Array;
  out.dispose();
  writeCube({
    height: meta.cubeHeight,
    width: meta.cubeWidth,
    channels: meta.channels,
    data: Float32Array.from(values),
  }, outPath);
}
