import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { beforeAll, describe, expect, it } from "vitest";

import { blob, circle, loadDataset } from "../src/datasets.js";
import { defaultSpec } from "../src/cli.js";
import { buildModel, lossFunction } from "../src/model.js";
import { runMutant, trainOnce } from "../src/runMutant.js";
import { BuildFailure, parseModelSpec } from "../src/spec.js";
import { deriveSeed } from "../src/rng.js";

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "dlfault-tracer-"));

function dlfault(args: string[]): { code: number; stdout: string; stderr: string } {
  try {
    const stdout = execFileSync("dlfault", args, { encoding: "utf-8" });
    return { code: 0, stdout, stderr: "" };
  } catch (err: any) {
    return {
      code: err.status ?? 1,
      stdout: err.stdout?.toString() ?? "",
      stderr: err.stderr?.toString() ?? "",
    };
  }
}

describe("datasets", () => {
  it("blob is reproducible and binary-labeled", () => {
    const a = blob(100, 7);
    const b = blob(100, 7);
    expect(a.trainXs).toEqual(b.trainXs);
    expect(new Set(a.trainYs)).toEqual(new Set([0, 1]));
    expect(a.trainXs.length + a.testXs.length).toBe(100);
  });

  it("circle classes differ by radius", () => {
    const ds = circle(200, 3);
    const radius = (p: number[]) => Math.hypot(p[0], p[1]);
    const inner = ds.trainXs.filter((_, i) => ds.trainYs[i] === 0).map(radius);
    const outer = ds.trainXs.filter((_, i) => ds.trainYs[i] === 1).map(radius);
    const mean = (v: number[]) => v.reduce((s, x) => s + x, 0) / v.length;
    expect(mean(inner)).toBeLessThan(mean(outer));
  });

  it("unknown dataset name throws", () => {
    expect(() => loadDataset("mnist-42")).toThrow(/unknown dataset/);
  });
});

describe("spec and model building", () => {
  it("rejects unknown optimizer with BuildFailure", () => {
    const spec = defaultSpec(2);
    spec.optimizer.name = "Nadamax";
    expect(() => buildModel(spec, 2, 1, 0)).toThrow(BuildFailure);
  });

  it("rejects malformed spec JSON", () => {
    expect(() => parseModelSpec("{not json")).toThrow(BuildFailure);
    expect(() => parseModelSpec(JSON.stringify({ layers: [] }))).toThrow(
      /schema error/,
    );
  });

  it("loss functions cover the mutation vocabulary", () => {
    for (const name of [
      "mean_squared_error",
      "mean_absolute_error",
      "mean_absolute_percentage_error",
      "binary_crossentropy",
      "categorical_crossentropy",
      "sparse_categorical_crossentropy",
    ]) {
      expect(lossFunction(name)).toBeTypeOf("function");
    }
    expect(() => lossFunction("hinge")).toThrow(BuildFailure);
  });

  it("derived seeds differ per repetition but are stable", () => {
    const seeds = [0, 1, 2, 3].map((i) => deriveSeed(42, i));
    expect(new Set(seeds).size).toBe(4);
    expect(seeds).toEqual([0, 1, 2, 3].map((i) => deriveSeed(42, i)));
  });
});

describe("round trip into the diagnosis toolkit", () => {
  const tracePath = path.join(tmp, "blob-2epoch.jsonl");

  beforeAll(async () => {
    await trainOnce(defaultSpec(2), blob(400, 0), 0, {
      maxEpochs: 2,
      emitter: {
        outputPath: tracePath,
        runId: "blob-2epoch",
        datasetName: "blob",
        everyNBatches: null,
      },
    });
  }, 120_000);

  it("2-epoch per-epoch trace has a header and 2 records", () => {
    const lines = fs
      .readFileSync(tracePath, "utf-8")
      .trim()
      .split("\n")
      .map((l) => JSON.parse(l));
    expect(lines).toHaveLength(3);
    expect(lines[0].kind).toBe("header");
    expect(lines[0].interval_policy).toBe("epoch");
    expect(lines[1].kind).toBe("record");
    expect(lines[2].epoch).toBe(1);
    // per-layer summaries present with finite weight stats
    expect(lines[1].layers).toHaveLength(2);
    expect(typeof lines[1].layers[0].w_mean).toBe("number");
    expect(typeof lines[1].layers[0].g_mean_abs).toBe("number");
    expect(lines[1].val_acc).not.toBeNull();
  });

  it("primary extract consumes the trace with zero validation errors", () => {
    const csv = path.join(tmp, "features.csv");
    const res = dlfault(["--output", csv, "extract", tracePath]);
    expect(res.code).toBe(0);
    expect(res.stderr).not.toMatch(/warning|error/);
    const lines = fs.readFileSync(csv, "utf-8").trim().split("\n");
    expect(lines).toHaveLength(2); // header + one run
    expect(lines[0].split(",")).toHaveLength(161);
    expect(lines[1].startsWith("blob-2epoch,")).toBe(true);
  }, 60_000);

  it("lr-decrease mutant is judged killed against the baseline", async () => {
    const base = defaultSpec(30);
    const mutant = structuredClone(base);
    mutant.optimizer.learning_rate = 1e-14; // LrDecrease range [1e-16, 1e-10]

    const reps = 8;
    const baseRun = await runMutant(base, "blob", reps, 11, { maxEpochs: 15 });
    const mutRun = await runMutant(mutant, "blob", reps, 11, { maxEpochs: 15 });
    expect(baseRun.crashes).toBe(0);
    expect(mutRun.crashes).toBe(0);
    for (const a of [...baseRun.accuracies, ...mutRun.accuracies]) {
      expect(a).toBeGreaterThanOrEqual(0);
      expect(a).toBeLessThanOrEqual(1);
    }

    const basePath = path.join(tmp, "base-acc.json");
    const mutPath = path.join(tmp, "mut-acc.json");
    fs.writeFileSync(basePath, JSON.stringify(baseRun.accuracies));
    fs.writeFileSync(mutPath, JSON.stringify(mutRun.accuracies));
    const verdictPath = path.join(tmp, "verdict.json");
    const res = dlfault(["--output", verdictPath, "kill-check", basePath, mutPath]);
    expect(res.code).toBe(0);
    const verdict = JSON.parse(fs.readFileSync(verdictPath, "utf-8"));
    expect(verdict.killed).toBe(true);
    expect(verdict.mutant_worse).toBe(true);
  }, 240_000);
});
