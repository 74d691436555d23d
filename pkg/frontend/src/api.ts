// Typed client for the conductor session API. Pure data in, data out:
// every UI behaviour goes through these calls and nothing else.

export interface AskedQuestion {
  ask_kind: "slot_fill" | "authorize";
  target: string;
  prompt: string;
  action_id: string;
}

export interface TurnOutput {
  messages: string[];
  asked: AskedQuestion | null;
  achieved: string[] | null;
  trace_delta: number[];
}

export interface LtmRow {
  element: string;
  value: string;
  sensitive: boolean;
  provenance: { kind: string; record_seq?: number };
}

export interface GoalRow {
  goal: string[];
  status: string;
  pending: { ask_kind: string; target: string; prompt: string } | null;
}

export interface StateDoc {
  session_id: string;
  mode: string;
  ltm: LtmRow[];
  goal_stack: GoalRow[];
  finished_goals: GoalRow[];
  counters: Record<string, number>;
  learned: string[];
  pruned: string[];
  authorized: string[];
}

export interface TraceRecord {
  seq: number;
  skill_id: string;
  pair_id: string;
  action_id: string;
  inputs_consumed: string[];
  desired_outcome_index: number;
  actual_outcome: string[];
  success: boolean;
  invalid_invocation: boolean;
}

export interface PlanSnapshot {
  turn: number;
  goal: string[];
  status: string;
  steps: string[];
  stats: { expanded: number; generated: number };
}

export interface TraceDoc {
  records: TraceRecord[];
  plans: PlanSnapshot[];
}

export type ExplainKind = "what" | "how" | "why" | "chain";

export interface ChainStepDoc {
  skill_id: string;
  focus: string;
  attribution: { element: string; weight: number } | null;
}

export interface ExplainDoc {
  kind: ExplainKind;
  structured: Record<string, unknown> & {
    steps?: ChainStepDoc[];
    items?: { element: string; sentence: string; source: string }[];
    links?: { skill_id: string; consumed: string[]; produced: string[] }[];
  };
  text: string[];
}

export class ApiError extends Error {
  constructor(readonly status: number, readonly code: string, message: string) {
    super(message);
  }
}

async function parse<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const err = (body as { error?: { code?: string; message?: string } }).error ?? {};
    throw new ApiError(response.status, err.code ?? "error", err.message ?? response.statusText);
  }
  return body as T;
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async createSession(overrides: Record<string, unknown> = {}): Promise<string> {
    const response = await fetch(this.url("/v1/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(overrides),
    });
    const doc = await parse<{ session_id: string }>(response);
    return doc.session_id;
  }

  async postEvent(sessionId: string, text: string): Promise<TurnOutput> {
    const response = await fetch(this.url(`/v1/sessions/${sessionId}/events`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ kind: "utterance", text }),
    });
    return parse<TurnOutput>(response);
  }

  async state(sessionId: string): Promise<StateDoc> {
    return parse<StateDoc>(await fetch(this.url(`/v1/sessions/${sessionId}/state`)));
  }

  async trace(sessionId: string): Promise<TraceDoc> {
    return parse<TraceDoc>(await fetch(this.url(`/v1/sessions/${sessionId}/trace`)));
  }

  async latestPlan(sessionId: string): Promise<PlanSnapshot | null> {
    const response = await fetch(this.url(`/v1/sessions/${sessionId}/plan`));
    if (response.status === 404) {
      await response.json().catch(() => undefined);
      return null;
    }
    return parse<PlanSnapshot>(response);
  }

  async explain(
    sessionId: string,
    kind: ExplainKind,
    element?: string,
    mode?: "final" | "chain",
  ): Promise<ExplainDoc> {
    const params = new URLSearchParams({ kind });
    if (element) params.set("element", element);
    if (mode) params.set("mode", mode);
    const response = await fetch(this.url(`/v1/sessions/${sessionId}/explain?${params}`));
    return parse<ExplainDoc>(response);
  }
}
