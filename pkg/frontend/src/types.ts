// Typed view of the report payload served at /api/report. Only the
// fields the dashboard reads are modeled; extra keys pass through.

export type SceneScores = Record<string, number | null>;

export type SceneMetrics = {
  f1: number | null;
  iou?: number | null;
  accuracy?: number | null;
  precision?: number | null;
  recall?: number | null;
  has_truth?: boolean;
};

export type Scene = {
  scene_id: string;
  scores: SceneScores;
  metrics: SceneMetrics;
  attributes: Record<string, number | null>;
  flags: string[];
};

export type CurvePoint = {
  coverage: number;
  risk: number;
  nonrejected_f1: number;
};

export type Curve = {
  score_name: string;
  points: CurvePoint[];
  aurc: number;
  risk_at_half: number;
  auc_nrf1: number;
  nrf1_at_half: number;
  undefined_f1_scenes: string[];
};

export type DecileBin = {
  index: number;
  value_lo: number;
  value_hi: number;
  count: number;
  mean_score: number | null;
  mean_f1: number | null;
};

export type Grouping = {
  attribute: string;
  score_name: string;
  bins: DecileBin[];
  excluded_missing: number;
};

export type Trend = {
  attribute: string;
  score_name: string;
  pearson_r: number | null;
  slope: number | null;
  intercept: number | null;
  n_bins_used: number;
  flags: string[];
};

export type CombinerSection = {
  feature_names: string[];
  weights: number[];
  bias: number;
  selected_threshold: number | null;
  train_scene_ids: string[];
  eval_scene_ids: string[];
} | null;

export type Report = {
  schema_version: number;
  run: {
    seed: number;
    config: Record<string, unknown>;
    config_digest: string;
  };
  scenes: Scene[];
  curves: Curve[];
  summary_table: Record<string, unknown>[];
  groupings: Grouping[];
  trends: Trend[];
  combiner: CombinerSection;
};

export type SortColumn = "scene_id" | "f1" | string; // score names sort too
export type SortDirection = "asc" | "desc";

// Client-side state over an immutable report. The report object itself
// is deep-frozen at load time; every interaction replaces fields here.
export type ReportView = {
  report: Report;
  activeScore: string;
  threshold: number;
  thetaF: number;
  sortColumn: SortColumn;
  sortDirection: SortDirection;
  selectedScene: string | null;
};
