/**
 * CLI entry point. The harness starts this with workload flags, writes
 * one config line to stdin, and reads event lines until done/fatal.
 * Any failure turns into a fatal event plus a nonzero exit.
 */

import * as readline from "node:readline";
import { parseArgs } from "node:util";

import { DEFAULT_DUMMY_OPTIONS } from "./model";
import { encodeEvent } from "./protocol";
import { decodeConfig } from "./protocol";
import { DEFAULT_SESSION_OPTIONS, SessionOptions, runSession } from "./session";

function numberFlag(raw: string | undefined, name: string, fallback: number): number {
  if (raw === undefined) {
    return fallback;
  }
  const value = Number(raw);
  if (!Number.isFinite(value)) {
    throw new Error(`--${name} expects a number, got ${JSON.stringify(raw)}`);
  }
  return value;
}

export function optionsFromArgv(argv: string[]): SessionOptions {
  const { values } = parseArgs({
    args: argv,
    options: {
      "n-inputs": { type: "string" },
      "error-rate": { type: "string" },
      "n-classes": { type: "string" },
      "dataset-load-s": { type: "string" },
      "model-load-s": { type: "string" },
      "spin-per-input-unit": { type: "string" },
      "batch-overhead-ops": { type: "string" },
    },
  });
  return {
    nInputs: numberFlag(values["n-inputs"], "n-inputs", DEFAULT_SESSION_OPTIONS.nInputs),
    datasetLoadS: numberFlag(values["dataset-load-s"], "dataset-load-s", DEFAULT_SESSION_OPTIONS.datasetLoadS),
    modelLoadS: numberFlag(values["model-load-s"], "model-load-s", DEFAULT_SESSION_OPTIONS.modelLoadS),
    model: {
      errorRate: numberFlag(values["error-rate"], "error-rate", DEFAULT_DUMMY_OPTIONS.errorRate),
      nClasses: numberFlag(values["n-classes"], "n-classes", DEFAULT_DUMMY_OPTIONS.nClasses),
      spinPerInputUnit: numberFlag(
        values["spin-per-input-unit"], "spin-per-input-unit", DEFAULT_DUMMY_OPTIONS.spinPerInputUnit),
      batchOverheadOps: numberFlag(
        values["batch-overhead-ops"], "batch-overhead-ops", DEFAULT_DUMMY_OPTIONS.batchOverheadOps),
    },
  };
}

function readFirstLine(): Promise<string | null> {
  return new Promise((resolve) => {
    const rl = readline.createInterface({ input: process.stdin });
    let settled = false;
    rl.on("line", (line) => {
      if (!settled) {
        settled = true;
        rl.close();
        resolve(line);
      }
    });
    rl.on("close", () => {
      if (!settled) {
        settled = true;
        resolve(null);
      }
    });
  });
}

async function main(): Promise<void> {
  const emit = (event: Parameters<typeof encodeEvent>[0]) => {
    process.stdout.write(encodeEvent(event) + "\n");
  };
  try {
    const options = optionsFromArgv(process.argv.slice(2));
    const line = await readFirstLine();
    if (line === null) {
      throw new Error("stdin closed before a config line arrived");
    }
    const config = decodeConfig(line);
    await runSession(config, options, emit);
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err);
    emit({ kind: "fatal", message });
    process.exitCode = 1;
  }
}

main();
