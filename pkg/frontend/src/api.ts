// Typed fetch client for the session service.  One in-flight mutation per
// session: callers check `busy` and the server answers 409 if they race it.

import type {
  DescriptionView,
  HistoryView,
  PredicateView,
  QuestionPayload,
  QuestionType,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: { error?: string; violations?: string[] },
  ) {
    super(`HTTP ${status}: ${body.error ?? "request failed"}`);
  }
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export class Api {
  sessionId: string | null = null;
  busy = false;

  constructor(
    private base: string,
    private pollMs = 250,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.base + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await resp.json();
    if (resp.status >= 400) throw new ApiError(resp.status, body);
    return body as T;
  }

  private async awaitReady(first: DescriptionView | { status: string }): Promise<DescriptionView> {
    let payload = first as DescriptionView;
    while (payload.status === "pending") {
      await sleep(this.pollMs);
      payload = await this.request<DescriptionView>(`/sessions/${this.sessionId}/description`);
    }
    return payload;
  }

  async createSession(pack: string, model: string, epsilon0: number, seed = 0): Promise<string> {
    const body = await this.request<{ id: string }>("/sessions", {
      method: "POST",
      body: JSON.stringify({ v: 1, pack, model, epsilon0, seed }),
    });
    this.sessionId = body.id;
    return body.id;
  }

  private async mutate(path: string, payload: unknown): Promise<DescriptionView> {
    this.busy = true;
    try {
      const first = await this.request<DescriptionView>(path, {
        method: "POST",
        body: JSON.stringify(payload),
      });
      return await this.awaitReady(first);
    } finally {
      this.busy = false;
    }
  }

  ask(question: QuestionPayload): Promise<DescriptionView> {
    return this.mutate(`/sessions/${this.sessionId}/question`, question);
  }

  respond(kind: string, arg?: string): Promise<DescriptionView> {
    return this.mutate(`/sessions/${this.sessionId}/response`, { v: 1, kind, arg });
  }

  description(): Promise<DescriptionView> {
    return this.request<DescriptionView>(`/sessions/${this.sessionId}/description`);
  }

  history(): Promise<HistoryView> {
    return this.request<HistoryView>(`/sessions/${this.sessionId}/history`);
  }

  async predicates(pack: string, questionType?: QuestionType): Promise<PredicateView[]> {
    const suffix = questionType ? `?questionType=${questionType}` : "";
    const body = await this.request<{ predicates: PredicateView[] }>(
      `/packs/${pack}/predicates${suffix}`,
    );
    return body.predicates;
  }
}
