import { describe, expect, it } from "vitest";

import {
  defaultSession,
  exportSession,
  formFor,
  importSession,
  POLICY_FORMS,
  toRequest,
  validateSession,
} from "../src/session.js";
import { DEFAULT_QUANTILE_LEVELS } from "../src/types.js";

function validSession() {
  const s = defaultSession("ember");
  s.policyClass = "location";
  s.params = [0.2];
  return s;
}

describe("policy forms", () => {
  it("declares the documented widget ranges", () => {
    const intensity = formFor("intensity");
    expect(intensity.params.map((p) => [p.min, p.max])).toEqual([
      [0, 100],
      [0, 100],
      [0, 180],
    ]);
    expect(formFor("fuel").params[0]).toMatchObject({ min: 0, max: 1 });
    expect(formFor("location").params[0]).toMatchObject({ min: 0, max: 1 });
  });

  it("every form's initial values validate", () => {
    for (const form of POLICY_FORMS) {
      const s = defaultSession("ember");
      s.policyClass = form.policyClass;
      s.params = form.params.map((p) => p.initial);
      expect(validateSession(s)).toEqual([]);
    }
  });
});

describe("validateSession", () => {
  it("blocks out-of-range parameters client-side", () => {
    const s = validSession();
    s.params = [1.5];
    expect(validateSession(s)).toEqual(["boundary must be in [0, 1]"]);
    s.params = [-0.1];
    expect(validateSession(s).length).toBe(1);
  });

  it("enforces the intensity band ordering", () => {
    const s = defaultSession("ember");
    s.policyClass = "intensity";
    s.params = [95, 75, 120];
    expect(validateSession(s)).toEqual([
      "band low must not exceed band high",
    ]);
  });

  it("requires a database and sane n/h/seed", () => {
    const s = validSession();
    s.dbId = "";
    s.n = 0;
    s.h = 2.5;
    s.seed = 0.1;
    expect(validateSession(s)).toEqual([
      "no database selected",
      "n must be a positive integer",
      "h must be a positive integer",
      "seed must be an integer",
    ]);
  });

  it("checks parameter arity", () => {
    const s = validSession();
    s.params = [0.2, 0.4];
    expect(validateSession(s)).toEqual(["location takes 1 parameter(s)"]);
  });
});

describe("toRequest / export / import", () => {
  it("produces the exact replayable request JSON", () => {
    const s = validSession();
    s.n = 3;
    s.h = 6;
    s.seed = 11;
    expect(toRequest(s)).toEqual({
      policy_class: "location",
      params: [0.2],
      feature: null,
      algorithm: "mfmci",
      n: 3,
      h: 6,
      db_id: "ember",
      seed: 11,
      variables: [],
      quantile_levels: DEFAULT_QUANTILE_LEVELS,
      metric: {},
      engine: "vectorized",
    });
  });

  it("refuses to export an invalid session", () => {
    const s = validSession();
    s.params = [7];
    expect(() => toRequest(s)).toThrow(/invalid session/);
  });

  it("round-trips through export and import", () => {
    const s = validSession();
    s.algorithm = "mfmc";
    s.seed = 42;
    const restored = importSession(exportSession(s));
    expect(restored.policyClass).toBe("location");
    expect(restored.params).toEqual([0.2]);
    expect(restored.algorithm).toBe("mfmc");
    expect(restored.seed).toBe(42);
    expect(exportSession(restored)).toBe(exportSession(s));
  });

  it("rejects malformed or out-of-range imports", () => {
    expect(() => importSession("{not json")).toThrow(/not valid JSON/);
    expect(() => importSession('"just a string"')).toThrow(/JSON object/);
    expect(() => importSession("{}")).toThrow(/policy_class/);
    const bad = JSON.stringify({
      policy_class: "location",
      params: [9],
      db_id: "ember",
      h: 6,
    });
    expect(() => importSession(bad)).toThrow(/boundary must be in/);
  });
});
