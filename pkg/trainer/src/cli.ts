/**
 * Minimal command line: `train` fits a checkpoint from a manifest,
 * `predict` turns a sensor image file into a cube file.
 */

import { DEFAULT_CONFIG, TrainConfig } from './model';
import { predictToFile } from './predict';
import { train } from './train';

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith('--') || i + 1 >= argv.length) {
      throw new Error(`malformed arguments near "${argv[i]}"`);
    }
    flags.set(argv[i].slice(2), argv[i + 1]);
  }
  return flags;
}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) {
    throw new Error(`missing required flag --${name}`);
  }
  return value;
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  if (command === 'train') {
    const flags = parseFlags(rest);
    const overrides: Partial<TrainConfig> = {};
    if (flags.has('epochs')) overrides.epochs = Number(flags.get('epochs'));
    if (flags.has('batch')) overrides.batchSize = Number(flags.get('batch'));
    if (flags.has('lr')) overrides.learningRate = Number(flags.get('lr'));
    if (flags.has('patience')) overrides.patience = Number(flags.get('patience'));
    const result = await train(required(flags, 'manifest'),
                               required(flags, 'checkpoint'), overrides);
    console.log(`trained ${result.trainLoss.length} epochs `
      + `(best val MSE ${result.meta.bestValMse.toExponential(3)} `
      + `at epoch ${result.meta.bestEpoch})`);
    return 0;
  }
  if (command === 'predict') {
    const flags = parseFlags(rest);
    const out = required(flags, 'out');
    const meta = await predictToFile(required(flags, 'checkpoint'),
                                     required(flags, 'image'), out);
    console.log(`wrote ${out} `
      + `(${meta.cubeHeight}x${meta.cubeWidth}x${meta.channels})`);
    return 0;
  }
  console.error('usage: trainer train --manifest CSV --checkpoint DIR '
    + `[--epochs N --batch N --lr X --patience N]\n`
    + '       trainer predict --checkpoint DIR --image HIMG --out HCUB');
  return 2;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(`error: ${err.message}`);
    process.exit(1);
  },
);

export { DEFAULT_CONFIG };
