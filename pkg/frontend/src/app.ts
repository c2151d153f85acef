/** Session controller: drives the next → render → submit loop.
 *
 * All session state is authoritative on the server; the controller only
 * remembers the session id (so a reload resumes at the next unanswered
 * scenario) and renders whatever the service returns next.
 */

import { ApiClient } from "./api.js";
import { ResultsView, ScenarioView, type ChoiceEvent } from "./views.js";
import type { NextPayload, ProbingView, ScenarioPayload } from "./types.js";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const SESSION_KEY = "recourselab.session";

export class SessionController {
  sessionId: string | null = null;
  results: ResultsView | null = null;
  private stopped = false;

  constructor(
    private api: ApiClient,
    private root: HTMLElement,
    private storage: StorageLike,
  ) {}

  /** Run the whole flow: create-or-resume, both sessions, results screen. */
  async run(participant = ""): Promise<void> {
    this.sessionId = this.storage.getItem(SESSION_KEY);
    if (this.sessionId === null) {
      const created = await this.api.createSession(participant);
      this.sessionId = created.session_id;
      this.storage.setItem(SESSION_KEY, this.sessionId);
    }
    while (!this.stopped) {
      const next = await this.api.next(this.sessionId);
      const finished = await this.step(next);
      if (finished) break;
    }
  }

  stop(): void {
    this.stopped = true;
  }

  /** Handle one next-payload; returns true when the session is complete. */
  private async step(next: NextPayload): Promise<boolean> {
    if (next.status === "awaiting_fit") {
      await this.api.fit(this.sessionId!);
      return false;
    }
    if (next.status === "done") {
      await this.showResults();
      return true;
    }
    if (next.scenario.kind === "probing") {
      await this.runProbing(next.scenario, next.probing);
    } else {
      const e = await this.renderAndAwait(next.scenario);
      await this.api.submit(this.sessionId!, {
        scenario_id: next.scenario.id,
        choice: e.choice,
        reason: e.reason,
      });
    }
    return false;
  }

  /** Probing loop: submit the initial pick, then escalation choices until
   * the protocol terminates; finally show the recorded limits. */
  private async runProbing(scenario: ScenarioPayload, view?: ProbingView): Promise<void> {
    let probing = view;
    while (!this.stopped) {
      if (probing?.terminated) break;
      const e = await this.renderAndAwait(scenario, probing);
      const ack = await this.api.submit(this.sessionId!, {
        scenario_id: scenario.id,
        choice: e.choice,
        reason: e.reason,
      });
      probing = ack.probing;
    }
    if (probing?.terminated) {
      new ScenarioView(this.root, scenario, () => {}, probing).render();
    }
  }

  private renderAndAwait(scenario: ScenarioPayload, probing?: ProbingView): Promise<ChoiceEvent> {
    return new Promise((resolve) => {
      new ScenarioView(this.root, scenario, resolve, probing).render();
    });
  }

  private async showResults(): Promise<void> {
    const [w, r] = [await this.api.weights(this.sessionId!), await this.api.report(this.sessionId!)];
    this.results = new ResultsView(this.root, r.data, w.data.weights, {
      reportRaw: r.raw,
      weightsRaw: w.raw,
    });
    this.results.render();
    this.storage.removeItem(SESSION_KEY);
  }
}
