/**
 * Test-taker page: one active session per tab, questions served one at a
 * time by the engine's selection, completion summary with the final
 * skill estimates. The session id is kept in the URL hash so a refresh
 * resumes at the same question (state lives on the server).
 */

import { ApiClient } from "./api.js";
import { TestFlow, type FlowSnapshot } from "./flow.js";
import {
  el,
  renderBanner,
  renderEntropyTrace,
  renderPosteriorBars,
  renderQuestionCard,
} from "./views.js";

export interface AppOptions {
  model: string;
  sessionId?: string;
  infoEvidence?: Record<string, number>;
}

export class TestApp {
  readonly flow: TestFlow;

  constructor(
    private readonly root: HTMLElement,
    api: ApiClient,
    private readonly options: AppOptions,
    private readonly onSession?: (sessionId: string) => void,
  ) {
    this.flow = new TestFlow(api, options.model, options.infoEvidence);
    this.flow.subscribe((snap) => this.render(snap));
  }

  async start(): Promise<void> {
    if (this.options.sessionId) {
      await this.flow.resume(this.options.sessionId);
    } else {
      await this.flow.start();
    }
    const sid = this.flow.snapshot().sessionId;
    if (sid && this.onSession) this.onSession(sid);
  }

  private render(snap: FlowSnapshot): void {
    this.root.replaceChildren();
    const header = el("div", "session-header");
    header.append(el("span", "model-tag", this.options.model));
    if (snap.sessionId) {
      const tag = el("span", "session-tag", snap.sessionId.slice(0, 8));
      tag.dataset.sessionId = snap.sessionId;
      header.append(tag);
    }
    header.append(el("span", "answered-tag", `${snap.answered} answered`));
    this.root.append(header);

    switch (snap.state.kind) {
      case "idle":
        this.root.append(el("p", "status", "Starting session..."));
        break;
      case "question": {
        const { question, step } = snap.state;
        this.root.append(
          renderQuestionCard(question, step, (state) => void this.flow.submit(state)),
        );
        break;
      }
      case "submitting":
        this.root.append(el("p", "status", "Recording your answer..."));
        break;
      case "retry":
        this.root.append(
          renderBanner(
            `Could not reach the server (${snap.state.message}). Your answer is kept.`,
            () => void this.flow.retry(),
          ),
        );
        break;
      case "done": {
        const doneBox = el("div", "done-screen");
        doneBox.append(el("h2", undefined, "Test complete"));
        doneBox.append(el("p", "status", "Final skill estimates:"));
        doneBox.append(renderPosteriorBars(snap.state.skillPosteriors));
        doneBox.append(renderEntropyTrace(snap.entropyTrace));
        this.root.append(doneBox);
        break;
      }
      case "error":
        this.root.append(renderBanner(`Session error: ${snap.state.message}`));
        break;
    }
  }
}
