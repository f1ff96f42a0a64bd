import * as fs from "node:fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { runMutant, trainOnce } from "./runMutant.js";
import { BuildFailure, ModelSpec, parseModelSpec } from "./spec.js";

/** Reference spec used by the `trace` command when none is given: a small
 * two-layer binary classifier appropriate for the synthetic datasets. */
export function defaultSpec(epochs: number): ModelSpec {
  return {
    layers: [
      { kind: "Dense", units: 16, activation: "relu" },
      { kind: "Dense", units: 1, activation: "sigmoid" },
    ],
    loss: { name: "binary_crossentropy" },
    optimizer: { name: "SGD", learning_rate: 0.1 },
    epochs: { value: epochs },
    batch_size: 32,
  };
}

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .scriptName("dlfault-tracer")
    .command(
      "trace",
      "train a model on a synthetic dataset, emitting the trace JSONL",
      (y) =>
        y
          .option("dataset", { type: "string", default: "blob" })
          .option("epochs", { type: "number", default: 2 })
          .option("run-id", { type: "string", default: "trace-run" })
          .option("out", { type: "string", demandOption: true })
          .option("spec", {
            type: "string",
            describe: "model spec JSON file (defaults to a built-in 2-layer net)",
          })
          .option("every-n-batches", { type: "number" })
          .option("seed", { type: "number", default: 0 }),
    )
    .command(
      "run-mutant",
      "train a (possibly mutated) spec repeatedly; write test accuracies as a JSON array",
      (y) =>
        y
          .option("spec", { type: "string", demandOption: true })
          .option("dataset", { type: "string", default: "blob" })
          .option("repetitions", { type: "number", default: 20 })
          .option("max-epochs", { type: "number", default: 30 })
          .option("seed", { type: "number", default: 0 })
          .option("out", { type: "string", demandOption: true }),
    )
    .demandCommand(1)
    .strict()
    .parse();

  const command = argv._[0];
  try {
    if (command === "trace") {
      const spec = argv.spec
        ? parseModelSpec(fs.readFileSync(argv.spec as string, "utf-8"))
        : defaultSpec(argv.epochs as number);
      const acc = await trainOnce(
        spec,
        (await import("./datasets.js")).loadDataset(
          argv.dataset as string,
          400,
          argv.seed as number,
        ),
        argv.seed as number,
        {
          maxEpochs: argv.epochs as number,
          emitter: {
            outputPath: argv.out as string,
            runId: argv["run-id"] as string,
            datasetName: argv.dataset as string,
            everyNBatches:
              argv["every-n-batches"] === undefined
                ? null
                : (argv["every-n-batches"] as number),
          },
        },
      );
      console.error(`trace written to ${argv.out}; final test accuracy ${acc.toFixed(3)}`);
      return 0;
    }
    if (command === "run-mutant") {
      const spec = parseModelSpec(fs.readFileSync(argv.spec as string, "utf-8"));
      const result = await runMutant(
        spec,
        argv.dataset as string,
        argv.repetitions as number,
        argv.seed as number,
        { maxEpochs: argv["max-epochs"] as number },
      );
      fs.writeFileSync(argv.out as string, JSON.stringify(result.accuracies) + "\n");
      if (result.crashes > 0) {
        console.error(`${result.crashes} of ${argv.repetitions} repetitions crashed`);
      }
      return 0;
    }
    console.error(`unknown command ${String(command)}`);
    return 2;
  } catch (err) {
    if (err instanceof BuildFailure) {
      console.error(`build failure: ${err.message}`);
      return 2;
    }
    console.error(`error: ${String(err)}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;

if (invokedDirectly) {
  main().then((code) => {
    process.exitCode = code;
  });
}
