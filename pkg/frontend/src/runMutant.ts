import * as tf from "@tensorflow/tfjs";

import { Dataset, loadDataset } from "./datasets.js";
import { buildModel, lossFunction } from "./model.js";
import { BuildFailure, ModelSpec } from "./spec.js";
import { deriveSeed } from "./rng.js";
import { EmitterSettings, GradientProbe, TraceEmitter } from "./trace.js";

export class TrainingCrash extends Error {}

export interface TrainOptions {
  maxEpochs?: number; // cap spec epochs for desk-scale runs
  validationSplit?: number;
  emitter?: EmitterSettings;
}

function tensors(ds: Dataset) {
  return {
    xs: tf.tensor2d(ds.trainXs),
    ys: tf.tensor2d(ds.trainYs, [ds.trainYs.length, 1]),
    testXs: tf.tensor2d(ds.testXs),
    testYs: tf.tensor2d(ds.testYs, [ds.testYs.length, 1]),
  };
}

/** Train one model from the spec and return its test accuracy. */
export async function trainOnce(
  spec: ModelSpec,
  ds: Dataset,
  seed: number,
  opts: TrainOptions = {},
): Promise<number> {
  const { xs, ys, testXs, testYs } = tensors(ds);
  const model = buildModel(spec, ds.trainXs[0].length, 1, seed);
  try {
    const epochs = Math.min(spec.epochs.value, opts.maxEpochs ?? spec.epochs.value);
    const callbacks: tf.CustomCallback[] = [];
    if (opts.emitter) {
      const probe: GradientProbe = {
        xs: xs.slice(0, Math.min(32, ds.trainXs.length)),
        ys: ys.slice(0, Math.min(32, ds.trainYs.length)),
        loss: lossFunction(spec.loss.name),
      };
      callbacks.push(new TraceEmitter(opts.emitter, model, probe).callback());
    }
    await model.fit(xs, ys, {
      epochs,
      batchSize: spec.batch_size ?? 32,
      shuffle: false, // keep repetitions deterministic
      verbose: 0,
      validationSplit: opts.validationSplit ?? 0.2,
      callbacks,
    });
    const evalOut = model.evaluate(testXs, testYs, { verbose: 0 }) as tf.Scalar[];
    const acc = (await evalOut[1].data())[0];
    evalOut.forEach((t) => t.dispose());
    if (!Number.isFinite(acc)) {
      throw new TrainingCrash("non-finite evaluation accuracy");
    }
    return acc;
  } finally {
    model.dispose();
    xs.dispose();
    ys.dispose();
    testXs.dispose();
    testYs.dispose();
  }
}

export interface MutantRunResult {
  accuracies: number[];
  crashes: number;
}

/** Train the spec `repetitions` times with derived seeds and collect test
 * accuracies; crashes record 0.0 and are counted, never fatal. */
export async function runMutant(
  spec: ModelSpec,
  datasetName: string,
  repetitions = 20,
  seed = 0,
  opts: TrainOptions = {},
): Promise<MutantRunResult> {
  const ds = loadDataset(datasetName, 400, seed);
  const accuracies: number[] = [];
  let crashes = 0;
  for (let rep = 0; rep < repetitions; rep++) {
    try {
      accuracies.push(await trainOnce(spec, ds, deriveSeed(seed, rep), opts));
    } catch (err) {
      if (err instanceof BuildFailure) {
        throw err; // unrealizable spec: no amount of retries helps
      }
      console.warn(`repetition ${rep} crashed: ${String(err)}`);
      accuracies.push(0.0);
      crashes++;
    }
  }
  return { accuracies, crashes };
}
