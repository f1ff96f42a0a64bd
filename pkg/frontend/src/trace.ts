import * as fs from "node:fs";

import * as tf from "@tensorflow/tfjs";

/** Interval policy for trace emission: per-epoch records and/or a record
 * every N batches (default 256). */
export interface EmitterSettings {
  outputPath: string;
  runId: string;
  datasetName: string;
  perEpoch?: boolean;
  everyNBatches?: number | null;
  layerSummary?: boolean;
}

/** Held batch used to probe gradients at emission time (recomputing
 * full-dataset gradients each interval would dominate training cost). */
export interface GradientProbe {
  xs: tf.Tensor;
  ys: tf.Tensor;
  loss: (ys: tf.Tensor, preds: tf.Tensor) => tf.Scalar;
}

type Json = Record<string, unknown>;

function encodeNum(x: number): number | string {
  if (Number.isNaN(x)) return "NaN";
  if (x === Infinity) return "Inf";
  if (x === -Infinity) return "-Inf";
  return x;
}

interface LayerSummary {
  name: string;
  w_min: number | string;
  w_max: number | string;
  w_mean: number | string;
  w_std: number | string;
  w_nan: boolean;
  w_inf: boolean;
  g_min_abs: number | string;
  g_max_abs: number | string;
  g_mean_abs: number | string;
  g_nan: boolean;
  g_inf: boolean;
  g_zero_frac: number | string;
}

function tensorStats(values: Float32Array | number[]) {
  let min = Infinity;
  let max = -Infinity;
  let sum = 0;
  let hasNan = false;
  let hasInf = false;
  let n = 0;
  for (const v of values) {
    if (Number.isNaN(v)) {
      hasNan = true;
      continue;
    }
    if (!Number.isFinite(v)) {
      hasInf = true;
      continue;
    }
    min = Math.min(min, v);
    max = Math.max(max, v);
    sum += v;
    n++;
  }
  const mean = n > 0 ? sum / n : NaN;
  let ss = 0;
  for (const v of values) {
    if (Number.isFinite(v)) ss += (v - mean) * (v - mean);
  }
  const std = n > 0 ? Math.sqrt(ss / n) : NaN;
  return { min: n > 0 ? min : NaN, max: n > 0 ? max : NaN, mean, std, hasNan, hasInf };
}

function absStats(values: Float32Array | number[]) {
  let min = Infinity;
  let max = 0;
  let sum = 0;
  let zeros = 0;
  let hasNan = false;
  let hasInf = false;
  let n = 0;
  for (const v of values) {
    if (Number.isNaN(v)) {
      hasNan = true;
      continue;
    }
    if (!Number.isFinite(v)) {
      hasInf = true;
      continue;
    }
    const a = Math.abs(v);
    min = Math.min(min, a);
    max = Math.max(max, a);
    sum += a;
    if (a === 0) zeros++;
    n++;
  }
  return {
    minAbs: n > 0 ? min : NaN,
    maxAbs: n > 0 ? max : NaN,
    meanAbs: n > 0 ? sum / n : NaN,
    zeroFrac: n > 0 ? zeros / n : 0,
    hasNan,
    hasInf,
  };
}

const ZERO_GRAD = {
  minAbs: 0,
  maxAbs: 0,
  meanAbs: 0,
  zeroFrac: 0,
  hasNan: false,
  hasInf: false,
};

export class TraceEmitter {
  private fd: number | null = null;
  private step = 0;
  private batchInEpoch = 0;
  private epoch = 0;
  private lastBatchLogs: tf.Logs | null = null;
  private gradientsAvailable: boolean;
  private readonly everyN: number | null;
  private readonly perEpoch: boolean;

  constructor(
    private readonly settings: EmitterSettings,
    private readonly model: tf.LayersModel,
    private readonly probe: GradientProbe | null,
  ) {
    this.everyN = settings.everyNBatches === undefined ? 256 : settings.everyNBatches;
    if (this.everyN !== null && this.everyN < 1) {
      throw new Error("everyNBatches must be >= 1");
    }
    this.perEpoch = settings.perEpoch ?? true;
    this.gradientsAvailable = probe !== null;
  }

  /** The framework callback object to pass into model.fit(). */
  callback(): tf.CustomCallback {
    return new tf.CustomCallback({
      onTrainBegin: async () => this.onTrainBegin(),
      onEpochBegin: async (epoch) => {
        this.epoch = epoch;
        this.batchInEpoch = 0;
      },
      onBatchEnd: async (batch, logs) => this.onBatchEnd(batch, logs),
      onEpochEnd: async (epoch, logs) => this.onEpochEnd(epoch, logs),
      onTrainEnd: async () => this.onTrainEnd(),
    });
  }

  private policyString(): string {
    const parts = [];
    if (this.perEpoch) parts.push("epoch");
    if (this.everyN !== null) parts.push(`batch:${this.everyN}`);
    return parts.join("+") || "epoch";
  }

  private writeLine(obj: Json) {
    if (this.fd === null) return;
    try {
      fs.writeSync(this.fd, JSON.stringify(obj) + "\n");
    } catch (err) {
      // trace I/O must never abort training
      console.warn(`trace emitter: write failed: ${String(err)}`);
      this.fd = null;
    }
  }

  private onTrainBegin() {
    try {
      this.fd = fs.openSync(this.settings.outputPath, "w");
    } catch (err) {
      console.warn(`trace emitter: cannot open output: ${String(err)}`);
      this.fd = null;
      return;
    }
    // probe gradients once; if unavailable, fall back to zero summaries
    if (this.probe !== null) {
      try {
        const grads = this.gradients();
        for (const g of Object.values(grads)) g.dispose();
      } catch {
        this.gradientsAvailable = false;
      }
    }
    const header: Json = {
      kind: "header",
      run_id: this.settings.runId,
      dataset: this.settings.datasetName,
      interval_policy: this.policyString(),
      layer_names: this.model.layers
        .filter((l) => l.trainableWeights.length > 0)
        .map((l) => l.name),
      gradient_probe: this.gradientsAvailable
        ? "held-batch, post-batch pre-update"
        : "unavailable; gradient fields emitted as zeros",
    };
    this.writeLine(header);
  }

  /** Per-variable gradients of the probe loss, keyed by variable name. */
  private gradients(): Record<string, tf.Tensor> {
    const probe = this.probe!;
    const vars = this.model.layers.flatMap((l) =>
      l.trainableWeights.map(
        (w) => (w as unknown as { val: tf.Variable }).val,
      ),
    );
    const { grads, value } = tf.variableGrads(
      () => probe.loss(probe.ys, this.model.apply(probe.xs, { training: false }) as tf.Tensor),
      vars,
    );
    value.dispose();
    return grads;
  }

  private layerSummaries(): LayerSummary[] {
    if (this.settings.layerSummary === false) return [];
    let grads: Record<string, tf.Tensor> | null = null;
    if (this.gradientsAvailable) {
      try {
        grads = this.gradients();
      } catch {
        grads = null;
      }
    }
    const out: LayerSummary[] = [];
    for (const layer of this.model.layers) {
      if (layer.trainableWeights.length === 0) continue;
      const weightVals: number[] = [];
      const gradVals: number[] = [];
      for (const w of layer.trainableWeights) {
        // read() returns the live variable; do not dispose it
        weightVals.push(...(w.read().dataSync() as Float32Array));
        const name = (w as unknown as { val: tf.Variable }).val.name;
        if (grads && grads[name]) {
          gradVals.push(...(grads[name].dataSync() as Float32Array));
        }
      }
      const ws = tensorStats(weightVals);
      const gs = gradVals.length > 0 ? absStats(gradVals) : ZERO_GRAD;
      out.push({
        name: layer.name,
        w_min: encodeNum(ws.min),
        w_max: encodeNum(ws.max),
        w_mean: encodeNum(ws.mean),
        w_std: encodeNum(ws.std),
        w_nan: ws.hasNan,
        w_inf: ws.hasInf,
        g_min_abs: encodeNum(gs.minAbs),
        g_max_abs: encodeNum(gs.maxAbs),
        g_mean_abs: encodeNum(gs.meanAbs),
        g_nan: gs.hasNan,
        g_inf: gs.hasInf,
        g_zero_frac: encodeNum(gs.zeroFrac),
      });
    }
    if (grads) for (const g of Object.values(grads)) g.dispose();
    return out;
  }

  private emitRecord(batch: number | null, logs: tf.Logs | null | undefined) {
    const get = (keys: string[]): number | null => {
      for (const k of keys) {
        const v = logs?.[k];
        if (typeof v === "number") return v;
      }
      return null;
    };
    const loss = get(["loss"]);
    const acc = get(["acc", "accuracy"]);
    const record: Json = {
      kind: "record",
      step: this.step++,
      epoch: this.epoch,
      batch,
      loss: loss === null ? "NaN" : encodeNum(loss),
      acc: acc === null ? "NaN" : encodeNum(acc),
      val_loss: maybe(get(["val_loss"])),
      val_acc: maybe(get(["val_acc", "val_accuracy"])),
      layers: this.layerSummaries(),
    };
    this.writeLine(record);
  }

  private onBatchEnd(batch: number, logs: tf.Logs | undefined) {
    this.batchInEpoch++;
    this.lastBatchLogs = logs ?? null;
    if (this.everyN !== null && this.batchInEpoch % this.everyN === 0) {
      this.emitRecord(batch, logs);
    }
  }

  private onEpochEnd(epoch: number, logs: tf.Logs | undefined) {
    this.epoch = epoch;
    if (this.perEpoch) {
      this.emitRecord(null, logs ?? this.lastBatchLogs);
    }
  }

  private onTrainEnd() {
    if (this.fd !== null) {
      try {
        fs.closeSync(this.fd);
      } catch (err) {
        console.warn(`trace emitter: close failed: ${String(err)}`);
      }
      this.fd = null;
    }
  }
}

function maybe(x: number | null): number | string | null {
  return x === null ? null : encodeNum(x);
}

/** Convenience wrapper: build the callback in one call. */
export function traceCallback(
  settings: EmitterSettings,
  model: tf.LayersModel,
  probe: GradientProbe | null = null,
): tf.CustomCallback {
  return new TraceEmitter(settings, model, probe).callback();
}
