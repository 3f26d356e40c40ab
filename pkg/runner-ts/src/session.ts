/**
 * One measurement session: config in, phased event stream out.
 *
 * Phase order is baseline (pure idle), dataset load, model load,
 * inference. Every start gets a matching end; predictions surface as
 * their batch completes; a memory report lands inside each working
 * phase so the harness has a fallback when it cannot poll us.
 */

import { DummyModel, DummyModelOptions, InferenceInput, ModelAdapter } from "./model";
import { PhaseName, RunConfig, RunnerEvent } from "./protocol";

export type EmitFn = (event: RunnerEvent) => void;

export interface SessionOptions {
  nInputs: number;
  datasetLoadS: number;
  modelLoadS: number;
  model?: Partial<DummyModelOptions>;
  /** override the shipped dummy model with a real backend */
  adapter?: ModelAdapter;
  /** injected for tests; defaults to this process's RSS */
  residentBytes?: () => number;
}

export const DEFAULT_SESSION_OPTIONS: Pick<SessionOptions, "nInputs" | "datasetLoadS" | "modelLoadS"> = {
  nInputs: 10,
  datasetLoadS: 0.05,
  modelLoadS: 0.05,
};

const sleep = (seconds: number) =>
  seconds > 0 ? new Promise<void>((resolve) => setTimeout(resolve, seconds * 1000)) : Promise.resolve();

function checkDataset(ref: string): void {
  if (ref !== "synthetic" && !ref.startsWith("synthetic:")) {
    throw new Error(`unknown dataset ${JSON.stringify(ref)}; this runner serves synthetic data only`);
  }
}

export async function runSession(config: RunConfig, options: SessionOptions, emit: EmitFn): Promise<void> {
  if (options.nInputs < 1 || !Number.isInteger(options.nInputs)) {
    throw new Error(`n-inputs must be a positive integer, got ${options.nInputs}`);
  }
  if (options.datasetLoadS < 0 || options.modelLoadS < 0) {
    throw new Error("load durations must be non-negative");
  }

  const started = process.hrtime.bigint();
  const tRunner = () => Number(process.hrtime.bigint() - started) / 1e9;
  const rss = options.residentBytes ?? (() => process.memoryUsage().rss);
  const stamp = (event: RunnerEvent): RunnerEvent => ({ ...event, t_runner: tRunner() });
  const phase = (kind: "phase_start" | "phase_end", name: PhaseName) =>
    emit(stamp({ kind, phase: name }));

  emit(stamp({ kind: "hello" }));

  phase("phase_start", "baseline");
  await sleep(config.baselineSeconds);
  phase("phase_end", "baseline");

  phase("phase_start", "dataset_load");
  checkDataset(config.datasetRef);
  await sleep(options.datasetLoadS);
  emit(stamp({ kind: "memory_report", resident_bytes: rss() }));
  phase("phase_end", "dataset_load");

  const adapter = options.adapter ?? new DummyModel(config.seed, config.repeatIndex, options.model);
  phase("phase_start", "model_load");
  await adapter.load();
  await sleep(options.modelLoadS);
  emit(stamp({ kind: "memory_report", resident_bytes: rss() }));
  phase("phase_end", "model_load");

  const inputs: InferenceInput[] = [];
  for (let i = 0; i < options.nInputs; i++) {
    inputs.push({ inputId: `in-${i}`, inputSize: config.inputSize });
  }

  phase("phase_start", "inference");
  for (let offset = 0; offset < inputs.length; offset += config.batchSize) {
    const batch = inputs.slice(offset, offset + config.batchSize);
    const pairs = await adapter.infer(batch);
    if (pairs.length !== batch.length) {
      throw new Error(`adapter returned ${pairs.length} pairs for a batch of ${batch.length}`);
    }
    for (const pair of pairs) {
      emit(stamp({
        kind: "prediction",
        input_id: pair.inputId,
        predicted: pair.predicted,
        truth: pair.truth,
      }));
    }
    emit(stamp({ kind: "memory_report", resident_bytes: rss() }));
  }
  phase("phase_end", "inference");

  emit(stamp({ kind: "done" }));
}
