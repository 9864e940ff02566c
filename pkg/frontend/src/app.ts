/**
 * DOM wiring for the teaching console: transcript rendering with expandable
 * step traces, the preference panel (refreshed once per completed agent
 * turn), confirmation buttons, input gating and inline error banners.
 */

import { ApiError, TeachingApi } from "./api.js";
import {
  applyAgentTurn,
  applyError,
  applyPreferences,
  beginSend,
  canSend,
  initialState,
  panelRows,
  SessionViewState,
} from "./state.js";

export interface AppHandles {
  root: HTMLElement;
  state: () => SessionViewState;
  send: (text: string) => Promise<void>;
  confirm: (choice: "yes" | "no") => Promise<void>;
  start: (userId: string) => Promise<void>;
}

export function mountApp(root: HTMLElement, api: TeachingApi, userId = "web-user"): AppHandles {
  let state = initialState();

  root.innerHTML = `
    <div class="layout">
      <section class="chat">
        <div class="banner" id="banner" hidden></div>
        <ol class="transcript" id="transcript"></ol>
        <div class="confirm-bar" id="confirm-bar" hidden>
          <button id="confirm-yes">Yes</button>
          <button id="confirm-no">No</button>
        </div>
        <form id="composer">
          <input id="input" type="text" autocomplete="off"
                 placeholder="teach me a preference..." />
          <button id="send" type="submit" disabled>Send</button>
        </form>
      </section>
      <aside class="panel">
        <h2>Stored preferences</h2>
        <div id="prefs"></div>
      </aside>
    </div>`;

  const el = {
    banner: root.querySelector<HTMLDivElement>("#banner")!,
    transcript: root.querySelector<HTMLOListElement>("#transcript")!,
    confirmBar: root.querySelector<HTMLDivElement>("#confirm-bar")!,
    confirmYes: root.querySelector<HTMLButtonElement>("#confirm-yes")!,
    confirmNo: root.querySelector<HTMLButtonElement>("#confirm-no")!,
    composer: root.querySelector<HTMLFormElement>("#composer")!,
    input: root.querySelector<HTMLInputElement>("#input")!,
    send: root.querySelector<HTMLButtonElement>("#send")!,
    prefs: root.querySelector<HTMLDivElement>("#prefs")!,
  };

  function render() {
    el.banner.hidden = state.banner === null;
    el.banner.textContent = state.banner ?? "";

    el.transcript.innerHTML = "";
    for (const entry of state.transcript) {
      const li = document.createElement("li");
      li.className = `entry ${entry.speaker}`;
      const bubble = document.createElement("div");
      bubble.className = "bubble";
      bubble.textContent = entry.text;
      li.appendChild(bubble);
      if (entry.speaker === "agent" && entry.trace.length) {
        const details = document.createElement("details");
        details.className = "trace";
        const summary = document.createElement("summary");
        summary.textContent = `${entry.trace.length} steps`;
        details.appendChild(summary);
        const list = document.createElement("ul");
        for (const step of entry.trace) {
          const item = document.createElement("li");
          item.textContent = `${step.kind} ${step.name} (${step.confidence.toFixed(2)})`;
          list.appendChild(item);
        }
        details.appendChild(list);
        li.appendChild(details);
      }
      el.transcript.appendChild(li);
    }

    el.confirmBar.hidden = !state.panel.pendingConfirmation;
    el.input.disabled = state.inFlight || state.phase !== "AwaitUser" || state.sessionId === null;
    el.send.disabled = !canSend(state, el.input.value);

    el.prefs.innerHTML = "";
    const rows = panelRows(state);
    if (!rows.length) {
      const empty = document.createElement("p");
      empty.className = "empty";
      empty.textContent = "nothing taught yet";
      el.prefs.appendChild(empty);
    }
    for (const [domain, records] of rows) {
      const h = document.createElement("h3");
      h.textContent = domain;
      el.prefs.appendChild(h);
      const ul = document.createElement("ul");
      ul.dataset.domain = domain;
      for (const rec of records) {
        const li = document.createElement("li");
        li.textContent = rec.condition
          ? `${rec.entity_value} (${rec.polarity}, ${rec.condition})`
          : `${rec.entity_value} (${rec.polarity})`;
        ul.appendChild(li);
      }
      el.prefs.appendChild(ul);
    }
  }

  async function refreshPanel() {
    state = applyPreferences(state, await api.preferences(userId));
  }

  async function send(text: string) {
    if (!canSend(state, text)) return;
    state = beginSend(state, text);
    render();
    try {
      const response = await api.sendUtterance(state.sessionId!, text);
      state = applyAgentTurn(state, response);
      await refreshPanel(); // panel mirrors the KB after every agent turn
    } catch (err) {
      state = applyError(state, err instanceof ApiError ? `${err.status}: ${err.message}` : String(err));
    }
    render();
  }

  async function confirm(choice: "yes" | "no") {
    if (!state.panel.pendingConfirmation) return;
    state = { ...state, panel: { ...state.panel, pendingConfirmation: false } };
    await send(choice === "yes" ? "yes" : "no thanks");
  }

  async function start(uid: string) {
    userId = uid;
    state = { ...initialState(), sessionId: await api.createSession(uid) };
    await refreshPanel();
    render();
  }

  el.composer.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const text = el.input.value;
    el.input.value = "";
    void send(text);
  });
  el.input.addEventListener("input", () => {
    el.send.disabled = !canSend(state, el.input.value);
  });
  el.confirmYes.addEventListener("click", () => void confirm("yes"));
  el.confirmNo.addEventListener("click", () => void confirm("no"));

  render();
  return { root, state: () => state, send, confirm, start };
}
