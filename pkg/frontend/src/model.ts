import * as tf from "@tensorflow/tfjs";

import { BuildFailure, ModelSpec } from "./spec.js";

const LOSS_IDS: Record<string, string> = {
  mean_squared_error: "meanSquaredError",
  mean_absolute_error: "meanAbsoluteError",
  mean_absolute_percentage_error: "meanAbsolutePercentageError",
  binary_crossentropy: "binaryCrossentropy",
  categorical_crossentropy: "categoricalCrossentropy",
  sparse_categorical_crossentropy: "sparseCategoricalCrossentropy",
};

const ACTIVATIONS = new Set([
  "relu", "sigmoid", "softmax", "softplus", "softsign", "tanh", "selu",
  "elu", "linear",
]);

const OPTIMIZER_DEFAULT_LR: Record<string, number> = {
  SGD: 0.01,
  RMSprop: 0.001,
  Adam: 0.001,
  Adadelta: 1.0,
  Adagrad: 0.01,
};

export function buildOptimizer(spec: ModelSpec): tf.Optimizer {
  const name = spec.optimizer.name;
  const lr = spec.optimizer.learning_rate ?? OPTIMIZER_DEFAULT_LR[name];
  switch (name) {
    case "SGD":
      return tf.train.sgd(lr);
    case "RMSprop":
      return tf.train.rmsprop(lr);
    case "Adam":
      return tf.train.adam(lr);
    case "Adadelta":
      return tf.train.adadelta(lr);
    case "Adagrad":
      return tf.train.adagrad(lr);
    default:
      throw new BuildFailure(`unknown optimizer ${JSON.stringify(name)}`);
  }
}

/** Per-example loss matching the spec's loss name, for gradient probes. */
export function lossFunction(
  name: string,
): (ys: tf.Tensor, preds: tf.Tensor) => tf.Scalar {
  switch (name) {
    case "mean_squared_error":
      return (ys, preds) => preds.sub(ys).square().mean();
    case "mean_absolute_error":
      return (ys, preds) => preds.sub(ys).abs().mean();
    case "mean_absolute_percentage_error":
      return (ys, preds) =>
        ys.sub(preds).div(ys.abs().maximum(1e-7)).abs().mean().mul(100);
    case "binary_crossentropy":
      return (ys, preds) => tf.metrics.binaryCrossentropy(ys, preds).mean();
    case "categorical_crossentropy":
      return (ys, preds) => tf.metrics.categoricalCrossentropy(ys, preds).mean();
    case "sparse_categorical_crossentropy":
      // integer labels: pick out -log p(true class) per row
      return (ys, preds) => {
        const idx = ys.flatten().toInt();
        const oneHot = tf.oneHot(idx, preds.shape[preds.shape.length - 1]!);
        const logP = preds.clipByValue(1e-7, 1).log();
        return oneHot.mul(logP).sum(-1).mul(-1).mean();
      };
    default:
      throw new BuildFailure(`unknown loss ${JSON.stringify(name)}`);
  }
}

/** Materialize a compiled model from a spec.
 *
 * Dense layers are realized directly; the final layer's units are forced to
 * the dataset's output width. Initializer seeds derive from `seed` so two
 * builds with the same seed start from identical weights.
 */
export function buildModel(
  spec: ModelSpec,
  inputDim: number,
  outputUnits: number,
  seed: number,
): tf.Sequential {
  const lossId = LOSS_IDS[spec.loss.name];
  if (!lossId) {
    throw new BuildFailure(`unknown loss ${JSON.stringify(spec.loss.name)}`);
  }
  const denseLayers = spec.layers.filter((l) => l.kind === "Dense");
  if (denseLayers.length === 0) {
    throw new BuildFailure("spec contains no Dense layers");
  }
  for (const l of spec.layers) {
    if (l.activation != null && !ACTIVATIONS.has(l.activation)) {
      throw new BuildFailure(
        `unknown activation ${JSON.stringify(l.activation)}`,
      );
    }
  }
  const model = tf.sequential();
  denseLayers.forEach((l, i) => {
    const last = i === denseLayers.length - 1;
    model.add(
      tf.layers.dense({
        name: `dense_${i}`,
        units: last ? outputUnits : (l.units ?? 8),
        activation: (l.activation ?? "linear") as never,
        inputShape: i === 0 ? [inputDim] : undefined,
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed + i }),
        biasInitializer: "zeros",
      }),
    );
  });
  model.compile({
    optimizer: buildOptimizer(spec),
    loss: lossId,
    metrics: ["accuracy"],
  });
  return model;
}
