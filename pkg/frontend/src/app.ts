/** Console bootstrap: connect/create forms, 1 Hz polling, chat input.
 *
 * Rendering always goes through a fresh GET of the server state; POST
 * responses only trigger that refresh (plus inline error banners), so the
 * view never drifts from what the server would reproduce.
 */
import { ApiError, Client } from "./api.js";
import { renderPractice, renderSession, showBanner } from "./render.js";
import { practiceView, sessionView } from "./view.js";

const POLL_MS = 1000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function formValue(form: HTMLFormElement, name: string): string {
  return (form.elements.namedItem(name) as HTMLInputElement | null)?.value.trim() ?? "";
}

export function startApp(client: Client = new Client("")): void {
  const sessionRoot = el<HTMLElement>("session-panel");
  const practiceRoot = el<HTMLElement>("practice-panel");

  let sessionId: string | null = null;
  let practiceId: string | null = null;

  async function refreshSession(): Promise<void> {
    if (!sessionId) return;
    try {
      const state = await client.getSession(sessionId);
      renderSession(sessionRoot, sessionView(state), client.sessionImageUrl(sessionId));
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        showBanner(sessionRoot, `session ${sessionId} not found`);
        sessionId = null;
      }
    }
  }

  async function refreshPractice(): Promise<void> {
    if (!practiceId) return;
    try {
      const state = await client.getPractice(practiceId);
      renderPractice(practiceRoot, practiceView(state), client.practiceImageUrl(practiceId));
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        showBanner(practiceRoot, `trial ${practiceId} not found`);
        practiceId = null;
      }
    }
  }

  setInterval(() => {
    void refreshSession();
    void refreshPractice();
  }, POLL_MS);

  el<HTMLFormElement>("connect-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const form = event.currentTarget as HTMLFormElement;
    sessionId = formValue(form, "session_id");
    showBanner(sessionRoot, null);
    sessionRoot.hidden = false;
    void refreshSession();
  });

  el<HTMLFormElement>("create-session-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const form = event.currentTarget as HTMLFormElement;
    void (async () => {
      try {
        const created = await client.createSession(new FormData(form));
        sessionId = created.id;
        showBanner(sessionRoot, null);
        sessionRoot.hidden = false;
        await refreshSession();
      } catch (err) {
        showBanner(sessionRoot, err instanceof Error ? err.message : String(err));
        sessionRoot.hidden = false;
      }
    })();
  });

  el<HTMLFormElement>("utterance-form").addEventListener("submit", (event) => {
    event.preventDefault();
    if (!sessionId) return;
    const input = sessionRoot.querySelector<HTMLInputElement>(".utterance-input")!;
    const text = input.value.trim();
    if (!text) return;
    void (async () => {
      try {
        await client.sendUtterance(sessionId!, text);
        input.value = ""; // accepted: clear for the next instruction
        showBanner(sessionRoot, null);
      } catch (err) {
        // error: keep the input so the operator can edit and resend
        showBanner(sessionRoot, err instanceof Error ? err.message : String(err));
      }
      await refreshSession();
    })();
  });

  el<HTMLFormElement>("create-practice-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const form = event.currentTarget as HTMLFormElement;
    void (async () => {
      try {
        const trial = await client.createPractice(new FormData(form));
        practiceId = trial.id;
        showBanner(practiceRoot, null);
        practiceRoot.hidden = false;
        await refreshPractice();
      } catch (err) {
        showBanner(practiceRoot, err instanceof Error ? err.message : String(err));
        practiceRoot.hidden = false;
      }
    })();
  });

  el<HTMLFormElement>("practice-utterance-form").addEventListener("submit", (event) => {
    event.preventDefault();
    if (!practiceId) return;
    const input = practiceRoot.querySelector<HTMLInputElement>(".utterance-input")!;
    const text = input.value.trim();
    if (!text) return;
    void (async () => {
      try {
        await client.sendPracticeUtterance(practiceId!, text);
        input.value = "";
        showBanner(practiceRoot, null);
      } catch (err) {
        showBanner(practiceRoot, err instanceof Error ? err.message : String(err));
      }
      await refreshPractice();
    })();
  });
}

if (typeof document !== "undefined" && document.getElementById("session-panel")) {
  startApp();
}
