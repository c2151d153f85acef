import type { ProbingView, Profile, RecoursePayload, ScenarioPayload } from "../src/types.js";

export function profile(overrides: Partial<Profile> = {}): Profile {
  return {
    income: 50_000,
    credit_score: 600,
    employment_type: 2,
    education_level: 1,
    loan_amount: 20_000,
    ...overrides,
  };
}

export function recourse(
  source: Profile,
  cf: Partial<Profile>,
  deltas: Record<string, number>,
): RecoursePayload {
  const prox = Object.values(deltas).reduce((a, b) => a + b, 0);
  return {
    format_version: 1,
    source,
    counterfactual: { ...source, ...cf },
    leaf_id: 3,
    cost: { deltas, prox, weighted_prox: prox, sparsity: Object.keys(deltas).length },
  };
}

export function tradeoffScenario(): ScenarioPayload {
  const x = profile();
  return {
    format_version: 1,
    id: "sc-tradeoff-1",
    kind: "tradeoff",
    source: x,
    recourse_a: recourse(x, { income: 75_000 }, { income: 0.05102040816326531 }),
    recourse_b: recourse(x, { credit_score: 700, loan_amount: 15_000 }, {
      credit_score: 0.18181818181818182,
      loan_amount: 0.10204081632653061,
    }),
    meta: {},
  };
}

export function probingScenario(): ScenarioPayload {
  const x = profile();
  return {
    format_version: 1,
    id: "sc-probe-1",
    kind: "probing",
    source: x,
    recourse_a: recourse(x, { income: 80_000 }, { income: 0.061224489795918366 }),
    recourse_b: recourse(x, { credit_score: 720 }, { credit_score: 0.21818181818181817 }),
    meta: {},
  };
}

export function terminatedProbing(): ProbingView {
  return {
    phase: "Terminated",
    terminated: true,
    intervals: [
      { feature: "income", last_accepted: 80_500, first_rejected: 81_000, cap_is_schema_bound: false },
      { feature: "credit_score", last_accepted: 600, first_rejected: 720, cap_is_schema_bound: false },
    ],
  };
}
