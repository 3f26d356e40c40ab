import { describe, expect, it } from "vitest";

import { ConfigError, decodeConfig, encodeEvent } from "../src/protocol";

const VALID = {
  model_id: "mobilenet",
  device_id: "rpi5",
  framework_id: "litert",
  input_size: 224,
  batch_size: 2,
  dataset_ref: "synthetic",
  token_window: null,
  repeat_index: 3,
  seed: 42,
  baseline_seconds: 1.5,
};

describe("decodeConfig", () => {
  it("round trips a full config line", () => {
    const config = decodeConfig(JSON.stringify(VALID));
    expect(config.modelId).toBe("mobilenet");
    expect(config.inputSize).toBe(224);
    expect(config.batchSize).toBe(2);
    expect(config.tokenWindow).toBeNull();
    expect(config.repeatIndex).toBe(3);
    expect(config.baselineSeconds).toBe(1.5);
  });

  it("fills protocol defaults when optional fields are absent", () => {
    const { token_window, repeat_index, seed, baseline_seconds, ...rest } = VALID;
    const config = decodeConfig(JSON.stringify(rest));
    expect(config.tokenWindow).toBeNull();
    expect(config.repeatIndex).toBe(0);
    expect(config.seed).toBe(0);
    expect(config.baselineSeconds).toBe(3.0);
  });

  it("ignores unknown fields", () => {
    const config = decodeConfig(JSON.stringify({ ...VALID, future_knob: true }));
    expect(config.deviceId).toBe("rpi5");
  });

  it.each(["model_id", "device_id", "framework_id", "input_size", "batch_size", "dataset_ref"])(
    "rejects a config missing %s",
    (field) => {
      const doc: Record<string, unknown> = { ...VALID };
      delete doc[field];
      expect(() => decodeConfig(JSON.stringify(doc))).toThrow(ConfigError);
      expect(() => decodeConfig(JSON.stringify(doc))).toThrow(field);
    },
  );

  it("rejects non-JSON and non-object lines", () => {
    expect(() => decodeConfig("{oops")).toThrow(ConfigError);
    expect(() => decodeConfig("[1, 2]")).toThrow(ConfigError);
  });

  it("rejects out-of-range numerics", () => {
    expect(() => decodeConfig(JSON.stringify({ ...VALID, batch_size: 0 }))).toThrow("batch_size");
    expect(() => decodeConfig(JSON.stringify({ ...VALID, input_size: 2.5 }))).toThrow("input_size");
    expect(() => decodeConfig(JSON.stringify({ ...VALID, baseline_seconds: 0 }))).toThrow("baseline_seconds");
    expect(() => decodeConfig(JSON.stringify({ ...VALID, token_window: -1 }))).toThrow("token_window");
  });
});

describe("encodeEvent", () => {
  it("emits one JSON object with sorted keys", () => {
    const line = encodeEvent({ kind: "phase_start", phase: "baseline", t_runner: 0.25 });
    expect(line).toBe('{"kind":"phase_start","phase":"baseline","t_runner":0.25}');
  });

  it("drops undefined fields", () => {
    expect(encodeEvent({ kind: "done" })).toBe('{"kind":"done"}');
  });

  it("keeps prediction payload fields intact", () => {
    const line = encodeEvent({
      kind: "prediction",
      input_id: "in-0",
      predicted: "c1",
      truth: "c2",
    });
    const parsed = JSON.parse(line);
    expect(parsed).toEqual({ kind: "prediction", input_id: "in-0", predicted: "c1", truth: "c2" });
  });
});
