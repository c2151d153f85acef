import { beforeEach, describe, expect, it } from "vitest";

import { ResultsView, ScenarioView } from "../src/views.js";
import { formatValue } from "../src/format.js";
import type { ChoiceEvent, ReportPayload } from "../src/types.js";
import { probingScenario, terminatedProbing, tradeoffScenario } from "./fixtures.js";

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app")!;
});

describe("ScenarioView", () => {
  it("displays the payload deltas exactly, with no recomputation", () => {
    const sc = tradeoffScenario();
    new ScenarioView(root, sc, () => {}).render();
    const cards = root.querySelectorAll(".card");
    expect(cards).toHaveLength(2);
    const deltas = [...cards[1]!.querySelectorAll("td.delta")].map(
      (td) => (td as HTMLElement).dataset.delta,
    );
    expect(deltas).toEqual([
      String(sc.recourse_b.cost.deltas.credit_score),
      String(sc.recourse_b.cost.deltas.loan_amount),
    ]);
  });

  it("shows changed features as before→after rows and collapses the rest", () => {
    const sc = tradeoffScenario();
    new ScenarioView(root, sc, () => {}).render();
    const cardA = root.querySelectorAll(".card")[0]!;
    const rows = cardA.querySelectorAll("tr.change");
    expect(rows).toHaveLength(1);
    expect(rows[0]!.querySelector(".before")!.textContent).toBe(formatValue("income", 50_000));
    expect(rows[0]!.querySelector(".after")!.textContent).toBe(formatValue("income", 75_000));
    const unchanged = cardA.querySelector("details.unchanged")!;
    expect(unchanged.querySelectorAll("dt")).toHaveLength(4);
  });

  it("submits exactly one response even on double click", () => {
    const events: ChoiceEvent[] = [];
    new ScenarioView(root, tradeoffScenario(), (e) => events.push(e)).render();
    const btn = root.querySelector<HTMLButtonElement>('button[data-choice="A"]')!;
    btn.click();
    btn.click();
    root.querySelector<HTMLButtonElement>('button[data-choice="B"]')!.click();
    expect(events).toHaveLength(1);
    expect(events[0]!.choice).toBe("A");
  });

  it("offers reject-both only for probing scenarios", () => {
    new ScenarioView(root, tradeoffScenario(), () => {}).render();
    expect(root.querySelector('button[data-choice="reject_both"]')).toBeNull();
    new ScenarioView(root, probingScenario(), () => {}).render();
    expect(root.querySelector('button[data-choice="reject_both"]')).not.toBeNull();
  });

  it("passes the typed reason along with the choice", () => {
    const events: ChoiceEvent[] = [];
    new ScenarioView(root, tradeoffScenario(), (e) => events.push(e)).render();
    root.querySelector<HTMLTextAreaElement>("textarea.reason")!.value = "cheaper overall";
    root.querySelector<HTMLButtonElement>('button[data-choice="B"]')!.click();
    expect(events[0]).toEqual({ choice: "B", reason: "cheaper overall" });
  });

  it("renders terminal thresholds from the server payload verbatim", () => {
    new ScenarioView(root, probingScenario(), () => {}, terminatedProbing()).render();
    const items = [...root.querySelectorAll("li.interval")].map((li) => li.textContent);
    expect(items).toEqual([
      "income: between 80500 and 81000",
      "credit_score: between 600 and 720",
    ]);
    expect(root.querySelector("button")).toBeNull();
  });
});

describe("ResultsView", () => {
  const report: ReportPayload = {
    session_id: "abc",
    phase: "Complete",
    report: {
      n_scenarios: 35,
      bins: { none_acceptable: 3, one_acceptable: 7, both_acceptable: 25 },
      awp_accuracy: 0.8666666666666667,
      n_awp_evaluated: 15,
      prox_match_rate: 0.72,
      weighted_prox_match_rate: 0.88,
      sparsity_match_rate: null,
      rounded_choice_rate: 0.5,
    },
    thresholds: { caps: { income: 81_000.5 } },
    weights: { income: 1.75, credit_score: 0.5, employment_type: 0.25, education_level: 1.5, loan_amount: 1.0 },
    probing_intervals: {
      "sc-probe-1": [
        { feature: "income", last_accepted: 80_500, first_rejected: 81_000.5, cap_is_schema_bound: false },
      ],
    },
  };

  it("renders every number exactly as the payload states it", () => {
    const view = new ResultsView(root, report, report.weights, {
      reportRaw: "raw-report",
      weightsRaw: "raw-weights",
    });
    view.render();
    const stat = (key: string) =>
      root.querySelector<HTMLElement>(`td[data-stat="${key}"]`)!.dataset.exact;
    expect(stat("awp_accuracy")).toBe("0.8666666666666667");
    expect(stat("n_scenarios")).toBe("35");
    expect(stat("sparsity_match_rate")).toBe("n/a");
    const weightValues = [...root.querySelectorAll<HTMLElement>(".weight-value")].map(
      (s) => s.dataset.exact,
    );
    expect(weightValues).toEqual(["1.75", "0.5", "0.25", "1.5", "1"]);
    expect(root.querySelector<HTMLElement>("li.threshold")!.dataset.exact).toBe("81000.5");
  });

  it("keeps the raw response bodies it was sourced from", () => {
    const view = new ResultsView(root, report, report.weights, {
      reportRaw: "raw-report",
      weightsRaw: "raw-weights",
    });
    expect(view.reportRaw).toBe("raw-report");
    expect(view.weightsRaw).toBe("raw-weights");
  });
});
