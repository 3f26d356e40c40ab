/**
 * Runner-side view of the harness line protocol.
 *
 * The harness writes a single JSON config line to our stdin, then reads
 * JSON event lines from our stdout until `done` (or `fatal`). Unknown
 * config fields are ignored here, mirroring how the harness treats
 * unknown event fields.
 */

export type PhaseName = "baseline" | "dataset_load" | "model_load" | "inference";

export interface RunConfig {
  modelId: string;
  deviceId: string;
  frameworkId: string;
  inputSize: number;
  batchSize: number;
  datasetRef: string;
  tokenWindow: number | null;
  repeatIndex: number;
  seed: number;
  baselineSeconds: number;
}

export interface RunnerEvent {
  kind: "hello" | "phase_start" | "phase_end" | "prediction" | "memory_report" | "done" | "fatal";
  phase?: PhaseName;
  t_runner?: number;
  input_id?: string;
  predicted?: string;
  truth?: string;
  message?: string;
  resident_bytes?: number;
}

export class ConfigError extends Error {}

function requirePositiveInt(payload: Record<string, unknown>, key: string): number {
  const value = payload[key];
  if (typeof value !== "number" || !Number.isInteger(value) || value < 1) {
    throw new ConfigError(`${key} must be a positive integer, got ${JSON.stringify(value)}`);
  }
  return value;
}

function requireString(payload: Record<string, unknown>, key: string): string {
  const value = payload[key];
  if (typeof value !== "string" || value.length === 0) {
    throw new ConfigError(`${key} must be a non-empty string, got ${JSON.stringify(value)}`);
  }
  return value;
}

/** Parse the harness's config line. Throws ConfigError on anything off. */
export function decodeConfig(line: string): RunConfig {
  let payload: unknown;
  try {
    payload = JSON.parse(line);
  } catch (err) {
    throw new ConfigError(`config line is not valid JSON: ${(err as Error).message}`);
  }
  if (typeof payload !== "object" || payload === null || Array.isArray(payload)) {
    throw new ConfigError("config line is not a JSON object");
  }
  const doc = payload as Record<string, unknown>;

  const tokenWindow = doc["token_window"];
  if (tokenWindow !== undefined && tokenWindow !== null) {
    if (typeof tokenWindow !== "number" || !Number.isInteger(tokenWindow) || tokenWindow < 1) {
      throw new ConfigError(`token_window must be a positive integer, got ${JSON.stringify(tokenWindow)}`);
    }
  }

  const repeatIndex = doc["repeat_index"] ?? 0;
  if (typeof repeatIndex !== "number" || !Number.isInteger(repeatIndex) || repeatIndex < 0) {
    throw new ConfigError(`repeat_index must be a non-negative integer, got ${JSON.stringify(repeatIndex)}`);
  }
  const seed = doc["seed"] ?? 0;
  if (typeof seed !== "number" || !Number.isInteger(seed)) {
    throw new ConfigError(`seed must be an integer, got ${JSON.stringify(seed)}`);
  }
  const baselineSeconds = doc["baseline_seconds"] ?? 3.0;
  if (typeof baselineSeconds !== "number" || !(baselineSeconds > 0)) {
    throw new ConfigError(`baseline_seconds must be > 0, got ${JSON.stringify(baselineSeconds)}`);
  }

  return {
    modelId: requireString(doc, "model_id"),
    deviceId: requireString(doc, "device_id"),
    frameworkId: requireString(doc, "framework_id"),
    inputSize: requirePositiveInt(doc, "input_size"),
    batchSize: requirePositiveInt(doc, "batch_size"),
    datasetRef: requireString(doc, "dataset_ref"),
    tokenWindow: tokenWindow === undefined || tokenWindow === null ? null : tokenWindow,
    repeatIndex,
    seed,
    baselineSeconds,
  };
}

/** One JSON line, keys sorted for stable output. No trailing newline. */
export function encodeEvent(event: RunnerEvent): string {
  const keys = Object.keys(event).sort();
  const ordered: Record<string, unknown> = {};
  for (const key of keys) {
    const value = (event as unknown as Record<string, unknown>)[key];
    if (value !== undefined) {
      ordered[key] = value;
    }
  }
  return JSON.stringify(ordered);
}
