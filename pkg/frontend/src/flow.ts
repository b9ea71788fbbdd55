/**
 * Test-taker session flow, kept free of DOM concerns so the contract
 * tests can drive it against a stub server.
 *
 * Answer submission is idempotent across retries: if a resubmission
 * lands after the original already registered, the engine's 409 is
 * treated as "accepted" and the flow advances instead of losing the
 * answer.
 */

import {
  ApiClient,
  ApiError,
  type QuestionPayload,
  type TranscriptRecord,
} from "./api.js";

export type FlowState =
  | { kind: "idle" }
  | { kind: "question"; question: QuestionPayload; step: number }
  | { kind: "submitting"; question: QuestionPayload }
  | { kind: "retry"; question: QuestionPayload; state: number; message: string }
  | { kind: "done"; skillPosteriors: Record<string, number[]>; entropy: number }
  | { kind: "error"; message: string };

export interface FlowSnapshot {
  sessionId: string | null;
  state: FlowState;
  entropy: number | null;
  entropyTrace: number[];
  skillPosteriors: Record<string, number[]>;
  answered: number;
}

export class TestFlow {
  private sessionId: string | null = null;
  private state: FlowState = { kind: "idle" };
  private entropy: number | null = null;
  private entropyTrace: number[] = [];
  private skillPosteriors: Record<string, number[]> = {};
  private answered = 0;
  private inFlight = false;
  private listeners: Array<(snap: FlowSnapshot) => void> = [];

  constructor(
    private readonly api: ApiClient,
    private readonly model: string,
    private readonly infoEvidence?: Record<string, number>,
  ) {}

  subscribe(listener: (snap: FlowSnapshot) => void): void {
    this.listeners.push(listener);
  }

  snapshot(): FlowSnapshot {
    return {
      sessionId: this.sessionId,
      state: this.state,
      entropy: this.entropy,
      entropyTrace: [...this.entropyTrace],
      skillPosteriors: this.skillPosteriors,
      answered: this.answered,
    };
  }

  private emit(): void {
    const snap = this.snapshot();
    for (const listener of this.listeners) listener(snap);
  }

  async start(): Promise<void> {
    try {
      const created = await this.api.createSession(this.model, this.infoEvidence);
      this.sessionId = created.session_id;
      this.entropy = created.entropy;
      this.entropyTrace = [created.entropy];
      this.skillPosteriors = created.skill_posteriors;
      await this.advance();
    } catch (err) {
      this.state = { kind: "error", message: describe(err) };
      this.emit();
    }
  }

  /** Resume an existing session (page refresh): ask the server where we are. */
  async resume(sessionId: string): Promise<void> {
    this.sessionId = sessionId;
    try {
      const est = await this.api.estimates(sessionId);
      this.entropy = est.entropy;
      this.entropyTrace = [...est.entropy_trace];
      this.skillPosteriors = est.skill_posteriors;
      this.answered = est.step;
      await this.advance();
    } catch (err) {
      this.state = { kind: "error", message: describe(err) };
      this.emit();
    }
  }

  private async advance(): Promise<void> {
    if (!this.sessionId) return;
    const next = await this.api.next(this.sessionId);
    if (next.done) {
      const est = await this.api.estimates(this.sessionId);
      this.entropy = est.entropy;
      this.entropyTrace = [...est.entropy_trace];
      this.skillPosteriors = est.skill_posteriors;
      this.state = {
        kind: "done",
        skillPosteriors: est.skill_posteriors,
        entropy: est.entropy,
      };
    } else {
      this.state = { kind: "question", question: next.question, step: next.step };
    }
    this.emit();
  }

  /** Submit the chosen 1-based state for the current question.

   * Re-entrant calls while a request is in flight are dropped (the UI
   * swaps to a "submitting" view immediately, so stale buttons cannot
   * double-fire an answer). */
  async submit(state: number): Promise<void> {
    if (this.state.kind !== "question" && this.state.kind !== "retry") return;
    const question = this.state.question;
    if (!this.sessionId || this.inFlight) return;
    this.inFlight = true;
    this.state = { kind: "submitting", question };
    this.emit();
    try {
      const result = await this.api.answer(this.sessionId, question.id, state);
      this.entropy = result.entropy;
      this.entropyTrace.push(result.entropy);
      this.skillPosteriors = result.skill_posteriors;
      this.answered = result.step;
      await this.advance();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // the earlier attempt landed; resync from the server and move on
        try {
          const est = await this.api.estimates(this.sessionId);
          this.entropy = est.entropy;
          this.entropyTrace = [...est.entropy_trace];
          this.skillPosteriors = est.skill_posteriors;
          this.answered = est.step;
          await this.advance();
        } catch (resyncErr) {
          this.state = { kind: "retry", question, state, message: describe(resyncErr) };
          this.emit();
        }
        return;
      }
      if (err instanceof ApiError) {
        this.state = { kind: "error", message: `${err.code}: ${err.message}` };
        this.emit();
        return;
      }
      // network trouble: keep the pending answer for an explicit retry
      this.state = { kind: "retry", question, state, message: describe(err) };
      this.emit();
    } finally {
      this.inFlight = false;
    }
  }

  async retry(): Promise<void> {
    if (this.state.kind !== "retry") return;
    await this.submit(this.state.state);
  }

  async fetchTranscript(): Promise<TranscriptRecord[]> {
    if (!this.sessionId) return [];
    const body = await this.api.transcript(this.sessionId);
    return body.records;
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  if (err instanceof Error) return err.message;
  return String(err);
}
