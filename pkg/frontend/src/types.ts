/** Wire types mirroring the service's JSON schemas.
 *
 * Field names are part of the HTTP contract; every number the UI displays
 * comes from one of these payloads.
 */

export type Algorithm =
  | "ground_truth"
  | "random_baseline"
  | "mfmc"
  | "mfmci"
  | "mfmci_biased";

export type Engine = "linear" | "vectorized" | "kdtree";

export interface MetricConfig {
  weights?: Record<string, number>;
  time_mode?: "hard" | "weighted";
  time_weight?: number;
  action_penalty?: number;
  standardize?: boolean;
}

/** The canonical request: the CLI replays this exact JSON via `simulate --request`. */
export interface PolicyQueryRequest {
  policy_class: string;
  params: number[];
  feature: string | null;
  algorithm: Algorithm;
  n: number;
  h: number;
  db_id: string;
  seed: number;
  variables: string[];
  quantile_levels: number[];
  metric: MetricConfig;
  engine: Engine;
}

export interface TrajectoryQueryResponse {
  set_id: string;
  value_estimate: number;
  algorithm: string;
  n: number;
  h: number;
  cached: boolean;
}

export interface QuantileSeries {
  variable: string;
  time_steps: number[];
  quantile_levels: number[];
  /** values[t][i] is the quantile_levels[i] quantile at time_steps[t]. */
  values: number[][];
}

export interface FidelityRequest {
  truth_set_id: string;
  surrogate_set_id: string;
  variables?: string[];
  quantile_levels?: number[];
}

export interface FidelityResponse {
  variables: string[];
  errors: Record<string, number[]>;
  heights: Record<string, number>;
  excluded: string[];
  weighted_total: number;
}

export interface DatabaseInfo {
  db_id: string;
  mode: string;
  sets: number;
  horizon: number;
  seed_trajectories: number;
  markov_features: string[];
  exo_features: string[];
  actions: string[];
  mdp: Record<string, unknown> | null;
  dispersion: number | null;
}

export interface BoundsResponse {
  kind: string;
  lipschitz: Record<string, number>;
  h: number;
  n: number;
  k: number;
  alpha: number;
  constant: number;
  bias_bound: number;
  variance_bound: number;
  sigma_h: number;
}

export interface ErrorBody {
  code: string;
  message: string;
}

export const DEFAULT_QUANTILE_LEVELS = [
  0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
];
