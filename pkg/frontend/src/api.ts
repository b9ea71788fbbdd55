/**
 * Typed client for the engine's HTTP API.
 *
 * Every number shown anywhere in the UI originates from these payloads;
 * the client never recomputes probabilities or entropies. States are
 * 1-based on the wire.
 */

export interface QuestionPayload {
  id: string;
  text: string;
  states: string[];
  scale: "boolean" | "points" | null;
}

export interface CreateSessionResponse {
  session_id: string;
  model: string;
  first_question: QuestionPayload | null;
  entropy: number;
  skill_posteriors: Record<string, number[]>;
}

export type NextResponse =
  | { done: true }
  | { done: false; question: QuestionPayload; ig: number; step: number };

export interface AnswerResponse {
  step: number;
  entropy: number;
  skill_posteriors: Record<string, number[]>;
  remaining: number;
}

export interface PredictedAnswer {
  state: number; // 1-based argmax
  probabilities: number[];
  tie: boolean;
}

export interface EstimatesResponse {
  step: number;
  entropy: number;
  entropy_trace: number[];
  skill_posteriors: Record<string, number[]>;
  predicted: Record<string, PredictedAnswer>;
}

export interface TranscriptRecord {
  step: number;
  asked: string;
  answer: number; // 1-based
  ig: number;
  entropy_after: number;
  skill_posteriors: Record<string, number[]>;
}

export interface BlueprintQuestion {
  id: string;
  max_points?: number;
  problem?: string;
  text?: string;
}

export interface BlueprintDoc {
  questions: BlueprintQuestion[];
  info_vars: { id: string; cardinality: number; labels?: string[]; text?: string }[];
  total_points?: number;
}

export interface ModelInfo {
  id: string;
  questions: number;
  skills: string[];
  info_vars: string[];
}

/** Error carrying the engine's {code, message} body and HTTP status. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (response.status === 204) {
      return undefined as T;
    }
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      const code = typeof payload.code === "string" ? payload.code : "unknown_error";
      const message = typeof payload.message === "string" ? payload.message : response.statusText;
      throw new ApiError(response.status, code, message);
    }
    return payload as T;
  }

  getModels(): Promise<{ models: ModelInfo[] }> {
    return this.request("GET", "/models");
  }

  getBlueprint(): Promise<BlueprintDoc> {
    return this.request("GET", "/blueprint");
  }

  createSession(
    model: string,
    infoEvidence?: Record<string, number>,
  ): Promise<CreateSessionResponse> {
    return this.request("POST", "/sessions", {
      model,
      info_evidence: infoEvidence ?? {},
    });
  }

  next(sessionId: string): Promise<NextResponse> {
    return this.request("GET", `/sessions/${sessionId}/next`);
  }

  answer(sessionId: string, question: string, state: number): Promise<AnswerResponse> {
    return this.request("POST", `/sessions/${sessionId}/answers`, { question, state });
  }

  estimates(sessionId: string): Promise<EstimatesResponse> {
    return this.request("GET", `/sessions/${sessionId}/estimates`);
  }

  transcript(sessionId: string): Promise<{ records: TranscriptRecord[] }> {
    return this.request("GET", `/sessions/${sessionId}/transcript`);
  }

  deleteSession(sessionId: string): Promise<void> {
    return this.request("DELETE", `/sessions/${sessionId}`);
  }
}
