import { Rng } from "./rng.js";

export interface Dataset {
  name: string;
  /** 2-D inputs, one row per sample. */
  trainXs: number[][];
  /** Binary labels (0/1). */
  trainYs: number[];
  testXs: number[][];
  testYs: number[];
}

function split(
  name: string,
  xs: number[][],
  ys: number[],
  testFraction: number,
): Dataset {
  const nTest = Math.floor(xs.length * testFraction);
  return {
    name,
    trainXs: xs.slice(nTest),
    trainYs: ys.slice(nTest),
    testXs: xs.slice(0, nTest),
    testYs: ys.slice(0, nTest),
  };
}

/** Two Gaussian clusters in the plane (linearly separable up to noise). */
export function blob(n = 400, seed = 0): Dataset {
  const rng = new Rng(seed);
  const xs: number[][] = [];
  const ys: number[] = [];
  for (let i = 0; i < n; i++) {
    const label = i % 2;
    const cx = label === 0 ? -1.5 : 1.5;
    const cy = label === 0 ? -1.0 : 1.0;
    xs.push([cx + 0.6 * rng.normal(), cy + 0.6 * rng.normal()]);
    ys.push(label);
  }
  return split("blob", xs, ys, 0.25);
}

/** Inner disc vs outer ring (not linearly separable). */
export function circle(n = 400, seed = 0): Dataset {
  const rng = new Rng(seed);
  const xs: number[][] = [];
  const ys: number[] = [];
  for (let i = 0; i < n; i++) {
    const label = i % 2;
    const radius = label === 0 ? 0.5 * rng.next() : 1.0 + 0.5 * rng.next();
    const angle = 2 * Math.PI * rng.next();
    xs.push([
      radius * Math.cos(angle) + 0.05 * rng.normal(),
      radius * Math.sin(angle) + 0.05 * rng.normal(),
    ]);
    ys.push(label);
  }
  return split("circle", xs, ys, 0.25);
}

const GENERATORS: Record<string, (n?: number, seed?: number) => Dataset> = {
  blob,
  circle,
};

export function loadDataset(name: string, n = 400, seed = 0): Dataset {
  const gen = GENERATORS[name];
  if (!gen) {
    throw new Error(
      `unknown dataset ${JSON.stringify(name)}; available: ${Object.keys(GENERATORS).join(", ")}`,
    );
  }
  return gen(n, seed);
}
