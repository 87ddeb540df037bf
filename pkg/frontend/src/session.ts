/** Explorer session state: the policy form, algorithm toggle, and pinned
 * comparison, plus export/import as the canonical request JSON that the CLI
 * replays (`trajstitch simulate --request session.json`).
 */

import type { Algorithm, Engine, PolicyQueryRequest } from "./types.js";
import { DEFAULT_QUANTILE_LEVELS } from "./types.js";

export interface ParamSpec {
  name: string;
  min: number;
  max: number;
  step: number;
  initial: number;
}

export interface PolicyFormSpec {
  policyClass: string;
  label: string;
  params: ParamSpec[];
  /** extra cross-field constraint, e.g. band lower edge <= upper edge */
  constraint?: (params: number[]) => string | null;
}

/** Parameter ranges each widget enforces; requests are only issued for
 * values inside them. */
export const POLICY_FORMS: PolicyFormSpec[] = [
  {
    policyClass: "intensity",
    label: "Suppress inside a severity band after an ignition day",
    params: [
      { name: "band low", min: 0, max: 100, step: 1, initial: 75 },
      { name: "band high", min: 0, max: 100, step: 1, initial: 95 },
      { name: "ignition day", min: 0, max: 180, step: 1, initial: 120 },
    ],
    constraint: (p) =>
      (p[0] ?? 0) <= (p[1] ?? 0) ? null : "band low must not exceed band high",
  },
  {
    policyClass: "fuel",
    label: "Suppress above a fuel threshold",
    params: [{ name: "threshold", min: 0, max: 1, step: 0.01, initial: 0.3 }],
  },
  {
    policyClass: "location",
    label: "Suppress past an ignition-position boundary",
    params: [{ name: "boundary", min: 0, max: 1, step: 0.01, initial: 0.2 }],
  },
];

export const ALGORITHMS: Algorithm[] = [
  "ground_truth",
  "random_baseline",
  "mfmc",
  "mfmci",
  "mfmci_biased",
];

export interface ExplorerSession {
  dbId: string;
  policyClass: string;
  params: number[];
  algorithm: Algorithm;
  n: number;
  h: number;
  seed: number;
  variables: string[];
  quantileLevels: number[];
  engine: Engine;
  /** set id of the pinned ground-truth comparison panel, if any */
  pinnedTruthId: string | null;
}

export function defaultSession(dbId = "", h = 20): ExplorerSession {
  const form = POLICY_FORMS[0]!;
  return {
    dbId,
    policyClass: form.policyClass,
    params: form.params.map((p) => p.initial),
    algorithm: "mfmci",
    n: 30,
    h,
    seed: 0,
    variables: [],
    quantileLevels: [...DEFAULT_QUANTILE_LEVELS],
    engine: "vectorized",
    pinnedTruthId: null,
  };
}

export function formFor(policyClass: string): PolicyFormSpec {
  const form = POLICY_FORMS.find((f) => f.policyClass === policyClass);
  if (!form) throw new Error(`unknown policy class ${policyClass}`);
  return form;
}

/** Returns the list of validation problems; empty means the form may submit. */
export function validateSession(session: ExplorerSession): string[] {
  const problems: string[] = [];
  if (!session.dbId) problems.push("no database selected");
  let form: PolicyFormSpec;
  try {
    form = formFor(session.policyClass);
  } catch (e) {
    return [(e as Error).message];
  }
  if (session.params.length !== form.params.length) {
    problems.push(
      `${session.policyClass} takes ${form.params.length} parameter(s)`,
    );
    return problems;
  }
  form.params.forEach((spec, i) => {
    const v = session.params[i]!;
    if (!Number.isFinite(v) || v < spec.min || v > spec.max) {
      problems.push(`${spec.name} must be in [${spec.min}, ${spec.max}]`);
    }
  });
  const cross = form.constraint?.(session.params);
  if (cross) problems.push(cross);
  if (!Number.isInteger(session.n) || session.n < 1)
    problems.push("n must be a positive integer");
  if (!Number.isInteger(session.h) || session.h < 1)
    problems.push("h must be a positive integer");
  if (!Number.isInteger(session.seed)) problems.push("seed must be an integer");
  return problems;
}

/** The exact JSON the service accepts and the CLI replays. */
export function toRequest(session: ExplorerSession): PolicyQueryRequest {
  const problems = validateSession(session);
  if (problems.length) {
    throw new Error(`invalid session: ${problems.join("; ")}`);
  }
  return {
    policy_class: session.policyClass,
    params: [...session.params],
    feature: null,
    algorithm: session.algorithm,
    n: session.n,
    h: session.h,
    db_id: session.dbId,
    seed: session.seed,
    variables: [...session.variables],
    quantile_levels: [...session.quantileLevels],
    metric: {},
    engine: session.engine,
  };
}

export function exportSession(session: ExplorerSession): string {
  return JSON.stringify(toRequest(session), null, 2) + "\n";
}

/** Rebuild form state from an exported request (inverse of toRequest). */
export function importSession(json: string): ExplorerSession {
  let raw: unknown;
  try {
    raw = JSON.parse(json);
  } catch {
    throw new Error("not valid JSON");
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new Error("session must be a JSON object");
  }
  const req = raw as Partial<PolicyQueryRequest>;
  if (typeof req.policy_class !== "string" || !Array.isArray(req.params)) {
    throw new Error("session needs policy_class and params");
  }
  const session: ExplorerSession = {
    ...defaultSession(typeof req.db_id === "string" ? req.db_id : ""),
    policyClass: req.policy_class,
    params: req.params.map(Number),
    algorithm: (req.algorithm ?? "mfmci") as Algorithm,
    n: typeof req.n === "number" ? req.n : 30,
    h: typeof req.h === "number" ? req.h : 20,
    seed: typeof req.seed === "number" ? req.seed : 0,
    variables: Array.isArray(req.variables) ? req.variables.map(String) : [],
    quantileLevels: Array.isArray(req.quantile_levels)
      ? req.quantile_levels.map(Number)
      : [...DEFAULT_QUANTILE_LEVELS],
    engine: (req.engine ?? "vectorized") as Engine,
  };
  const problems = validateSession(session);
  if (problems.length) {
    throw new Error(`invalid session: ${problems.join("; ")}`);
  }
  return session;
}
