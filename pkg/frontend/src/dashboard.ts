/**
 * Examiner dashboard: read-only view of a running session, polling the
 * estimates endpoint (never faster than every 500 ms) and rendering the
 * server's numbers verbatim: posterior bars, entropy trace, and the
 * predicted-answer table for the still-unanswered questions.
 */

import { ApiClient, ApiError, type EstimatesResponse } from "./api.js";
import {
  el,
  renderEntropyTrace,
  renderPosteriorBars,
  renderPredictedTable,
} from "./views.js";

export const MIN_POLL_INTERVAL_MS = 500;

export class Dashboard {
  private timer: ReturnType<typeof setInterval> | null = null;
  readonly intervalMs: number;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly sessionId: string,
    intervalMs: number = 1000,
  ) {
    this.intervalMs = Math.max(intervalMs, MIN_POLL_INTERVAL_MS);
  }

  async refresh(): Promise<void> {
    try {
      const est = await this.api.estimates(this.sessionId);
      this.render(est);
    } catch (err) {
      this.stop();
      if (err instanceof ApiError && err.status === 404) {
        const note =
          err.code === "session_expired"
            ? "This session has expired; ask the test taker to start a new one."
            : "This session no longer exists.";
        this.root.replaceChildren(el("div", "banner notice", note));
      } else {
        this.root.replaceChildren(
          el("div", "banner", `Dashboard error: ${(err as Error).message}`),
        );
      }
    }
  }

  start(): void {
    void this.refresh();
    this.timer = setInterval(() => void this.refresh(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  private render(est: EstimatesResponse): void {
    this.root.replaceChildren();
    const header = el("div", "session-header");
    header.append(el("span", "session-tag", this.sessionId.slice(0, 8)));
    header.append(el("span", "answered-tag", `step ${est.step}`));
    const entropy = el("span", "entropy-tag", `H = ${est.entropy.toFixed(4)}`);
    entropy.dataset.raw = String(est.entropy);
    header.append(entropy);
    this.root.append(header);
    this.root.append(renderPosteriorBars(est.skill_posteriors));
    this.root.append(renderEntropyTrace(est.entropy_trace));
    this.root.append(el("h3", undefined, "Predicted remaining answers"));
    this.root.append(renderPredictedTable(est.predicted));
  }
}
