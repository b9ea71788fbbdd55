/**
 * Entry point with two hash routes:
 *   #take?model=b3&api=http://127.0.0.1:8000     test-taker flow
 *   #watch?session=<id>&api=...                  examiner dashboard
 * The session id is appended to the hash once created so a refresh
 * resumes the same server-held session.
 */

import { ApiClient } from "./api.js";
import { TestApp } from "./app.js";
import { Dashboard } from "./dashboard.js";
import { el } from "./views.js";

function params(): URLSearchParams {
  const hash = window.location.hash;
  const q = hash.indexOf("?");
  return new URLSearchParams(q >= 0 ? hash.slice(q + 1) : "");
}

function route(): string {
  const hash = window.location.hash.replace(/^#/, "");
  const q = hash.indexOf("?");
  return q >= 0 ? hash.slice(0, q) : hash;
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  const p = params();
  const api = new ApiClient(p.get("api") ?? "");

  if (route() === "watch") {
    const sessionId = p.get("session");
    if (!sessionId) {
      root.replaceChildren(el("p", "status", "Add ?session=<id> to watch a session."));
      return;
    }
    new Dashboard(root, api, sessionId).start();
    return;
  }

  const model = p.get("model") ?? (await firstModel(api));
  if (!model) {
    root.replaceChildren(el("p", "status", "No fitted models on the server."));
    return;
  }
  const app = new TestApp(
    root,
    api,
    { model, sessionId: p.get("session") ?? undefined },
    (sid) => {
      if (!p.get("session")) {
        p.set("session", sid);
        window.location.hash = `take?${p.toString()}`;
      }
    },
  );
  await app.start();
}

async function firstModel(api: ApiClient): Promise<string | null> {
  try {
    const body = await api.getModels();
    return body.models[0]?.id ?? null;
  } catch {
    return null;
  }
}

window.addEventListener("hashchange", () => window.location.reload());
void boot();
