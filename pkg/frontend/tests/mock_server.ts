/** In-memory mock of the session service HTTP API.
 *
 * Holds canned states and scripted POST transitions only - deliberately no
 * pipeline logic, so tests prove the console displays exactly what the
 * server said and nothing it computed itself.
 */
import type {
  PracticeStateDto,
  SessionEventDto,
  SessionStateDto,
} from "../src/types.js";

interface ScriptedUtterance {
  event: SessionEventDto;
  next: SessionStateDto;
  status?: number;
}

interface ScriptedPracticeUtterance {
  reply: Record<string, unknown>;
  next: PracticeStateDto;
  status?: number;
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export class MockServer {
  sessions = new Map<string, SessionStateDto>();
  practices = new Map<string, PracticeStateDto>();
  utteranceScripts = new Map<string, ScriptedUtterance[]>();
  practiceScripts = new Map<string, ScriptedPracticeUtterance[]>();
  requests: Array<{ method: string; path: string }> = [];

  scriptUtterance(sessionId: string, step: ScriptedUtterance): void {
    const queue = this.utteranceScripts.get(sessionId) ?? [];
    queue.push(step);
    this.utteranceScripts.set(sessionId, queue);
  }

  scriptPracticeUtterance(trialId: string, step: ScriptedPracticeUtterance): void {
    const queue = this.practiceScripts.get(trialId) ?? [];
    queue.push(step);
    this.practiceScripts.set(trialId, queue);
  }

  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    this.requests.push({ method, path });

    let match = path.match(/^\/sessions\/([^/]+)\/utterance$/);
    if (match && method === "POST") {
      const queue = this.utteranceScripts.get(match[1]!) ?? [];
      const step = queue.shift();
      if (!step) return json({ error: "unscripted utterance" }, 500);
      if (step.status && step.status >= 400) {
        return json({ error: step.event.message }, step.status);
      }
      this.sessions.set(match[1]!, step.next);
      return json(step.event);
    }

    match = path.match(/^\/sessions\/([^/]+)$/);
    if (match && method === "GET") {
      const state = this.sessions.get(match[1]!);
      return state ? json(state) : json({ error: `no session ${match[1]}` }, 404);
    }

    match = path.match(/^\/practice\/([^/]+)\/utterance$/);
    if (match && method === "POST") {
      const queue = this.practiceScripts.get(match[1]!) ?? [];
      const step = queue.shift();
      if (!step) return json({ error: "unscripted practice utterance" }, 500);
      if (step.status && step.status >= 400) {
        return json({ error: String(step.reply["error"] ?? "rejected") }, step.status);
      }
      this.practices.set(match[1]!, step.next);
      return json(step.reply);
    }

    match = path.match(/^\/practice\/([^/]+)$/);
    if (match && method === "GET") {
      const state = this.practices.get(match[1]!);
      return state ? json(state) : json({ error: `no trial ${match[1]}` }, 404);
    }

    if (path === "/healthz") return json({ status: "ok", version: "test" });
    return json({ error: `unhandled ${method} ${path}` }, 500);
  };
}
