/** DOM views: scenario cards and the results screen.
 *
 * Invariants enforced here:
 *  - Displayed deltas are the scenario payload's deltas exactly; nothing is
 *    recomputed client-side (each delta cell carries the raw payload number
 *    in a data-delta attribute).
 *  - A view submits at most one choice; controls lock after the first click.
 *  - ResultsView renders only what GET /weights and /report returned.
 */

import { exact, formatValue, FEATURE_TITLES } from "./format.js";
import type {
  Choice,
  IntervalPayload,
  Profile,
  ProbingView,
  RecoursePayload,
  ReportPayload,
  ScenarioPayload,
} from "./types.js";
import { FEATURE_ORDER } from "./types.js";

export interface ChoiceEvent {
  choice: Choice;
  reason: string;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function profileRows(profile: Profile): HTMLElement {
  const dl = el("dl", "profile");
  for (const f of FEATURE_ORDER) {
    dl.appendChild(el("dt", "", FEATURE_TITLES[f]));
    dl.appendChild(el("dd", "", formatValue(f, profile[f])));
  }
  return dl;
}

/** Side-by-side card: changed rows up front, unchanged collapsed below. */
function recourseCard(title: string, r: RecoursePayload): HTMLElement {
  const card = el("section", "card");
  card.appendChild(el("h3", "", title));
  const changed = el("table", "changes");
  const unchanged = el("details", "unchanged");
  unchanged.appendChild(el("summary", "", "Unchanged"));
  const unchangedList = el("dl");
  for (const f of FEATURE_ORDER) {
    const delta = r.cost.deltas[f] ?? 0;
    if (delta > 0) {
      const row = el("tr", "change");
      row.dataset.feature = f;
      row.appendChild(el("td", "feature", FEATURE_TITLES[f]));
      row.appendChild(el("td", "before", formatValue(f, r.source[f])));
      row.appendChild(el("td", "arrow", "→"));
      row.appendChild(el("td", "after", formatValue(f, r.counterfactual[f])));
      const cell = el("td", "delta", exact(delta));
      cell.dataset.delta = exact(delta);
      row.appendChild(cell);
      changed.appendChild(row);
    } else {
      unchangedList.appendChild(el("dt", "", FEATURE_TITLES[f]));
      unchangedList.appendChild(el("dd", "", formatValue(f, r.source[f])));
    }
  }
  unchanged.appendChild(unchangedList);
  card.appendChild(changed);
  card.appendChild(unchanged);
  return card;
}

function intervalText(iv: IntervalPayload): string {
  if (iv.cap_is_schema_bound) {
    return `${iv.feature}: no limit found up to ${exact(iv.last_accepted)}`;
  }
  return `${iv.feature}: between ${exact(iv.last_accepted)} and ${exact(iv.first_rejected)}`;
}

export class ScenarioView {
  private submitted = false;

  constructor(
    private root: HTMLElement,
    private scenario: ScenarioPayload,
    private onSubmit: (e: ChoiceEvent) => void,
    private probing?: ProbingView,
  ) {}

  render(): void {
    this.root.replaceChildren();
    const wrap = el("div", "scenario");
    wrap.dataset.scenarioId = this.scenario.id;
    wrap.dataset.kind = this.scenario.kind;

    wrap.appendChild(el("h2", "", "Your current application"));
    wrap.appendChild(profileRows(this.scenario.source));

    const inProtocol = this.probing !== undefined && !this.probing.terminated
      && this.probing.offer_escalating !== undefined;
    const cards = el("div", "cards");
    let choices: Choice[];
    if (inProtocol) {
      const p = this.probing!;
      cards.appendChild(recourseCard("New offer", p.offer_escalating!));
      cards.appendChild(recourseCard("Previous offer", p.offer_standing!));
      choices = ["escalate", "other", "reject_both"];
    } else if (this.probing?.terminated) {
      wrap.appendChild(el("h2", "", "Your limits for this question"));
      const ul = el("ul", "intervals");
      for (const iv of this.probing.intervals) {
        ul.appendChild(el("li", "interval", intervalText(iv)));
      }
      if (this.probing.intervals.length === 0) {
        ul.appendChild(el("li", "interval", "no limits recorded"));
      }
      wrap.appendChild(ul);
      this.root.appendChild(wrap);
      return;
    } else {
      cards.appendChild(recourseCard("Option A", this.scenario.recourse_a));
      cards.appendChild(recourseCard("Option B", this.scenario.recourse_b));
      choices = this.scenario.kind === "probing" ? ["A", "B", "reject_both"] : ["A", "B"];
    }
    wrap.appendChild(cards);

    const reason = el("textarea", "reason");
    reason.placeholder = "Why did you choose this option? (optional)";
    wrap.appendChild(reason);

    const controls = el("div", "controls");
    const labels: Record<string, string> = {
      A: "Choose A",
      B: "Choose B",
      reject_both: "Reject both",
      escalate: "Accept new offer",
      other: "Prefer previous offer",
    };
    for (const choice of choices) {
      const btn = el("button", "choice", labels[choice]);
      btn.dataset.choice = choice;
      btn.addEventListener("click", () => {
        if (this.submitted) return;
        this.submitted = true;
        for (const b of controls.querySelectorAll("button")) {
          (b as HTMLButtonElement).disabled = true;
        }
        this.onSubmit({ choice, reason: reason.value });
      });
      controls.appendChild(btn);
    }
    wrap.appendChild(controls);
    this.root.appendChild(wrap);
  }
}

export class ResultsView {
  /** Exact response bodies the numbers were sourced from. */
  readonly reportRaw: string;
  readonly weightsRaw: string;

  constructor(
    private root: HTMLElement,
    private report: ReportPayload,
    private weights: Record<string, number>,
    raws: { reportRaw: string; weightsRaw: string },
  ) {
    this.reportRaw = raws.reportRaw;
    this.weightsRaw = raws.weightsRaw;
  }

  render(): void {
    this.root.replaceChildren();
    const wrap = el("div", "results");

    wrap.appendChild(el("h2", "", "Your effort weights"));
    const bars = el("div", "weight-bars");
    const max = Math.max(...Object.values(this.weights));
    for (const [feature, w] of Object.entries(this.weights)) {
      const row = el("div", "weight-row");
      row.dataset.feature = feature;
      row.appendChild(el("span", "weight-label", feature));
      const bar = el("div", "weight-bar");
      bar.style.width = `${(100 * w) / max}%`;
      row.appendChild(bar);
      const value = el("span", "weight-value", exact(w));
      value.dataset.exact = exact(w);
      row.appendChild(value);
      bars.appendChild(row);
    }
    wrap.appendChild(bars);

    wrap.appendChild(el("h2", "", "Your limits"));
    const limits = el("ul", "thresholds");
    for (const [feature, cap] of Object.entries(this.report.thresholds.caps)) {
      const li = el("li", "threshold", `${feature}: ${exact(cap)}`);
      li.dataset.feature = feature;
      li.dataset.exact = exact(cap);
      limits.appendChild(li);
    }
    const intervals = el("ul", "intervals");
    for (const ivs of Object.values(this.report.probing_intervals)) {
      for (const iv of ivs) {
        intervals.appendChild(el("li", "interval", intervalText(iv)));
      }
    }
    wrap.appendChild(limits);
    wrap.appendChild(intervals);

    wrap.appendChild(el("h2", "", "Session statistics"));
    const r = this.report.report;
    const stats: [string, string, number | null][] = [
      ["n_scenarios", "Scenarios answered", r.n_scenarios],
      ["bin_none", "Neither option acceptable", r.bins.none_acceptable],
      ["bin_one", "One option acceptable", r.bins.one_acceptable],
      ["bin_both", "Both options acceptable", r.bins.both_acceptable],
      ["awp_accuracy", "Predicted choices matched", r.awp_accuracy],
      ["n_awp_evaluated", "Pairs evaluated", r.n_awp_evaluated],
      ["prox_match_rate", "Choices matching lower proximity", r.prox_match_rate],
      ["weighted_prox_match_rate", "Choices matching lower weighted proximity",
        r.weighted_prox_match_rate],
      ["sparsity_match_rate", "Choices matching fewer changes", r.sparsity_match_rate],
      ["rounded_choice_rate", "Rounded option chosen", r.rounded_choice_rate],
    ];
    const table = el("table", "stats");
    for (const [key, label, value] of stats) {
      const row = el("tr");
      row.appendChild(el("td", "", label));
      const cell = el("td", "stat", exact(value));
      cell.dataset.stat = key;
      cell.dataset.exact = exact(value);
      row.appendChild(cell);
      table.appendChild(row);
    }
    wrap.appendChild(table);
    this.root.appendChild(wrap);
  }
}
