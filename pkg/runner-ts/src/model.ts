/**
 * The dummy model and the adapter seam for real ones.
 *
 * A real backend would implement ModelAdapter around its framework
 * (load the graph in load(), run the batch in infer()). The shipped
 * DummyModel fabricates label pairs deterministically from the run seed
 * and burns a configurable amount of arithmetic per input, so latency
 * responds to input size the way a real model's would.
 */

export interface InferenceInput {
  inputId: string;
  inputSize: number;
}

export interface PredictionPair {
  inputId: string;
  predicted: string;
  truth: string;
}

export interface ModelAdapter {
  load(): void | Promise<void>;
  infer(batch: InferenceInput[]): PredictionPair[] | Promise<PredictionPair[]>;
}

// Node has no seeded RNG in the standard library, so we carry a tiny
// 32-bit generator (mulberry32). Quality is irrelevant here; stable
// cross-platform output is the requirement.
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Fold run seed and repeat index into one 32-bit stream seed. */
export function mixSeed(seed: number, repeatIndex: number): number {
  let h = (seed ^ 0x9e3779b9) >>> 0;
  h = Math.imul(h ^ (h >>> 16), 0x21f0aaad) >>> 0;
  h = (h + repeatIndex + 1) >>> 0;
  h = Math.imul(h ^ (h >>> 15), 0x735a2d97) >>> 0;
  return (h ^ (h >>> 15)) >>> 0;
}

let sink = 0;

/** Busy-loop of integer arithmetic; the accumulator escapes so the JIT
 * cannot drop the loop. */
export function spin(ops: number): void {
  let acc = 1;
  for (let i = 0; i < ops; i++) {
    acc = (Math.imul(acc, 31) + i) >>> 0;
  }
  sink ^= acc;
}

export function spinSink(): number {
  return sink;
}

export interface DummyModelOptions {
  errorRate: number;
  nClasses: number;
  /** spin iterations per unit of input_size, per input */
  spinPerInputUnit: number;
  /** spin iterations of fixed per-batch dispatch cost */
  batchOverheadOps: number;
}

export const DEFAULT_DUMMY_OPTIONS: DummyModelOptions = {
  errorRate: 0.0,
  nClasses: 4,
  spinPerInputUnit: 150000,
  batchOverheadOps: 100000,
};

/**
 * Deterministic stand-in classifier.
 *
 * Each input gets a truth label drawn from c0..c{k-1}; with probability
 * errorRate the prediction is nudged to a different label. Identical
 * (seed, repeatIndex, options) reproduce the exact pair sequence, so a
 * configured error rate e lands the harness-side micro F1 near (1-e)*100.
 */
export class DummyModel implements ModelAdapter {
  private readonly rng: () => number;
  private readonly options: DummyModelOptions;

  constructor(seed: number, repeatIndex: number, options?: Partial<DummyModelOptions>) {
    this.options = { ...DEFAULT_DUMMY_OPTIONS, ...options };
    if (this.options.errorRate < 0 || this.options.errorRate > 1) {
      throw new Error(`error rate must be within [0, 1], got ${this.options.errorRate}`);
    }
    if (this.options.nClasses < 2) {
      throw new Error(`need at least 2 classes, got ${this.options.nClasses}`);
    }
    if (this.options.spinPerInputUnit < 0 || this.options.batchOverheadOps < 0) {
      throw new Error("spin work must be non-negative");
    }
    this.rng = mulberry32(mixSeed(seed, repeatIndex));
  }

  load(): void {
    // nothing to load; real adapters read weights here
  }

  infer(batch: InferenceInput[]): PredictionPair[] {
    const { errorRate, nClasses, spinPerInputUnit, batchOverheadOps } = this.options;
    spin(batchOverheadOps);
    const pairs: PredictionPair[] = [];
    for (const input of batch) {
      spin(input.inputSize * spinPerInputUnit);
      const truthIdx = Math.floor(this.rng() * nClasses);
      let predictedIdx = truthIdx;
      if (this.rng() < errorRate) {
        const offset = 1 + Math.floor(this.rng() * (nClasses - 1));
        predictedIdx = (truthIdx + offset) % nClasses;
      }
      pairs.push({
        inputId: input.inputId,
        predicted: `c${predictedIdx}`,
        truth: `c${truthIdx}`,
      });
    }
    return pairs;
  }
}
