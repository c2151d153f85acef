/** Server payload shapes, mirrored verbatim from the session service. */

export interface Profile {
  income: number;
  credit_score: number;
  employment_type: number;
  education_level: number;
  loan_amount: number;
}

export const FEATURE_ORDER: (keyof Profile)[] = [
  "income",
  "credit_score",
  "employment_type",
  "education_level",
  "loan_amount",
];

export interface CostPayload {
  deltas: Record<string, number>;
  prox: number;
  weighted_prox: number;
  sparsity: number;
}

export interface RecoursePayload {
  format_version: number;
  source: Profile;
  counterfactual: Profile;
  leaf_id: number;
  cost: CostPayload;
}

export interface ScenarioPayload {
  format_version: number;
  id: string;
  kind: "tradeoff" | "probing" | "rounding";
  source: Profile;
  recourse_a: RecoursePayload;
  recourse_b: RecoursePayload;
  meta: Record<string, unknown>;
}

export interface IntervalPayload {
  feature: string;
  last_accepted: number;
  first_rejected: number | null;
  cap_is_schema_bound: boolean;
}

export interface ProbingView {
  phase: string;
  terminated: boolean;
  intervals: IntervalPayload[];
  offer_escalating?: RecoursePayload;
  offer_standing?: RecoursePayload;
}

export type NextPayload =
  | { status: "scenario"; phase: string; scenario: ScenarioPayload; probing?: ProbingView }
  | { status: "awaiting_fit"; detail: string }
  | { status: "done" };

export interface SubmitAck {
  status: string;
  scenario_id: string;
  probing?: ProbingView;
}

export interface CreatedSession {
  session_id: string;
  phase: string;
  queue_length: number;
}

export interface WeightsPayload {
  weights: Record<string, number>;
}

export interface ReportPayload {
  session_id: string;
  phase: string;
  report: {
    n_scenarios: number;
    bins: { none_acceptable: number; one_acceptable: number; both_acceptable: number };
    awp_accuracy: number | null;
    n_awp_evaluated: number;
    prox_match_rate: number | null;
    weighted_prox_match_rate: number | null;
    sparsity_match_rate: number | null;
    rounded_choice_rate: number | null;
  };
  thresholds: { caps: Record<string, number>; employment_levels?: number[] };
  weights: Record<string, number>;
  probing_intervals: Record<string, IntervalPayload[]>;
}

export type Choice = "A" | "B" | "reject_both" | "escalate" | "other";

export interface ResponseBody {
  scenario_id: string;
  choice: Choice;
  reason?: string;
}
