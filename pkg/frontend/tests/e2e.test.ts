/**
 * Live end-to-end: a scripted browser-style session against the real
 * service.  Teaches a sports preference, triggers and confirms a
 * delete-all, and checks the preference panel against the preference
 * endpoint after every agent turn.
 *
 * Opt in with RUN_UI_E2E=1 (spawns the Python service; trains a small
 * bundle on first run, cached afterwards).
 */
import { ChildProcess, spawn } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { TeachingApi } from "../src/api.js";
import { mountApp, type AppHandles } from "../src/app.js";

const PORT = 8173;
const BASE = `http://127.0.0.1:${PORT}`;
const enabled = process.env.RUN_UI_E2E === "1";

let server: ChildProcess | null = null;

async function waitForReady(proc: ChildProcess): Promise<void> {
  await new Promise<void>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("service not ready in time")), 220_000);
    proc.stdout!.on("data", (chunk: Buffer) => {
      if (chunk.toString().includes("READY")) {
        clearTimeout(timer);
        resolve();
      }
    });
    proc.on("exit", (code) => reject(new Error(`service exited early (${code})`)));
  });
}

async function panelMatchesEndpoint(app: AppHandles, api: TeachingApi, userId: string) {
  const endpoint = await api.preferences(userId);
  const rendered = [...app.root.querySelectorAll(".panel ul li")].map((li) => li.textContent ?? "");
  expect(rendered.length).toBe(endpoint.length);
  for (const rec of endpoint) {
    expect(rendered.some((line) => line.includes(rec.entity_value))).toBe(true);
  }
}

describe.runIf(enabled)("chat UI against the live service", () => {
  beforeAll(async () => {
    // vitest runs with cwd = frontend/; the fixture script lives at the repo root
    server = spawn("python3", ["../scripts/serve_ui_fixture.py", "--port", String(PORT)], {
      stdio: ["ignore", "pipe", "inherit"],
    });
    await waitForReady(server);
  });

  afterAll(() => {
    server?.kill();
  });

  it("teaches, confirms a delete-all, and keeps the panel consistent", async () => {
    document.body.innerHTML = `<div id="app"></div>`;
    const userId = `e2e-${Date.now()}`;
    const api = new TeachingApi(BASE);
    const app = mountApp(document.getElementById("app")!, api, userId);
    await app.start(userId);
    expect(app.state().sessionId).toBeTruthy();
    await panelMatchesEndpoint(app, api, userId);

    // teach a sports preference (canonical wording from the seed bank)
    await app.send("the yankees are my favorite baseball team");
    let st = app.state();
    expect(st.banner).toBeNull();
    const agentEntry = st.transcript[st.transcript.length - 1];
    expect(agentEntry.speaker).toBe("agent");
    expect(agentEntry.trace.some((s) => s.kind === "api" && s.name === "setSportAffinity")).toBe(true);
    await panelMatchesEndpoint(app, api, userId);
    const sportsList = app.root.querySelector('ul[data-domain="sports"]');
    expect(sportsList?.textContent).toContain("the yankees");

    // a new session for the reset flow (the previous one may have ended)
    await app.start(userId);
    await panelMatchesEndpoint(app, api, userId);
    await app.send("forget everything i have taught you");
    st = app.state();
    expect(st.panel.pendingConfirmation).toBe(true);
    expect(app.root.querySelector<HTMLDivElement>("#confirm-bar")!.hidden).toBe(false);
    await panelMatchesEndpoint(app, api, userId);

    await app.confirm("yes");
    st = app.state();
    const deleteTurn = st.transcript[st.transcript.length - 1];
    expect(deleteTurn.trace.some((s) => s.kind === "api" && s.name === "deleteAllAffinityAction")).toBe(true);
    await panelMatchesEndpoint(app, api, userId);
    expect(await api.preferences(userId)).toHaveLength(0);
    expect(app.root.querySelector(".panel .empty")).not.toBeNull();
  });
});

describe.runIf(!enabled)("chat UI e2e (skipped)", () => {
  it.skip("set RUN_UI_E2E=1 to run against the live service", () => {});
});
