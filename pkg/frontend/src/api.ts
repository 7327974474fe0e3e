/** Thin typed client over the session service HTTP API.
 *
 * The fetch implementation is injectable so contract tests can run against
 * a mocked server; no coordinate math happens here.
 */
import type {
  PracticeStateDto,
  PracticeUtteranceReplyDto,
  SessionEventDto,
  SessionStateDto,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class Client {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const body = await response.text();
    if (!response.ok) {
      let message = body || response.statusText;
      try {
        const parsed = JSON.parse(body) as { error?: string };
        if (parsed.error) message = parsed.error;
      } catch {
        // non-JSON error body: keep raw text
      }
      throw new ApiError(response.status, message);
    }
    return JSON.parse(body) as T;
  }

  private postJson<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("/healthz");
  }

  getSession(id: string): Promise<SessionStateDto> {
    return this.request(`/sessions/${encodeURIComponent(id)}`);
  }

  createSession(form: FormData): Promise<{ id: string }> {
    return this.request("/sessions", { method: "POST", body: form });
  }

  sendUtterance(id: string, text: string): Promise<SessionEventDto> {
    return this.postJson(`/sessions/${encodeURIComponent(id)}/utterance`, { text });
  }

  sessionImageUrl(id: string): string {
    return `${this.baseUrl}/sessions/${encodeURIComponent(id)}/image`;
  }

  createPractice(form: FormData): Promise<PracticeStateDto> {
    return this.request("/practice", { method: "POST", body: form });
  }

  getPractice(id: string): Promise<PracticeStateDto> {
    return this.request(`/practice/${encodeURIComponent(id)}`);
  }

  sendPracticeUtterance(id: string, text: string): Promise<PracticeUtteranceReplyDto> {
    return this.postJson(`/practice/${encodeURIComponent(id)}/utterance`, { text });
  }

  practiceImageUrl(id: string): string {
    return `${this.baseUrl}/practice/${encodeURIComponent(id)}/image`;
  }
}
