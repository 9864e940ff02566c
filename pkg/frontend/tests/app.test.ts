import { beforeEach, describe, expect, it } from "vitest";

import { ApiError, TeachingApi } from "../src/api.js";
import type { AgentStep, PreferenceRecord, UtteranceResponse } from "../src/api.js";
import { mountApp } from "../src/app.js";

function flushTasks(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

class FakeApi {
  prefs: PreferenceRecord[] = [];
  replies: UtteranceResponse[] = [];
  failNext: ApiError | null = null;
  sent: string[] = [];

  async createSession(_userId: string): Promise<string> {
    return "session-fake";
  }

  async sendUtterance(_sid: string, text: string): Promise<UtteranceResponse> {
    if (this.failNext) {
      const err = this.failNext;
      this.failNext = null;
      throw err;
    }
    this.sent.push(text);
    const reply = this.replies.shift();
    if (!reply) throw new Error("no scripted reply");
    return reply;
  }

  async preferences(_userId: string): Promise<PreferenceRecord[]> {
    return this.prefs;
  }
}

const step = (kind: AgentStep["kind"], name: string, text?: string): AgentStep => ({
  kind,
  name,
  confidence: 1.0,
  ...(text !== undefined ? { text } : {}),
});

const rec = (domain: string, value: string): PreferenceRecord => ({
  user_id: "u",
  domain,
  entity_type: "sport_team",
  entity_value: value,
  polarity: "like",
  updated_at: 1,
});

describe("mounted app", () => {
  let root: HTMLElement;
  let api: FakeApi;

  beforeEach(async () => {
    document.body.innerHTML = `<div id="app"></div>`;
    root = document.getElementById("app")!;
    api = new FakeApi();
  });

  async function mountAndStart() {
    const app = mountApp(root, api as unknown as TeachingApi, "u");
    await app.start("u");
    return app;
  }

  it("renders agent replies and refreshes the panel after the turn", async () => {
    const app = await mountAndStart();
    api.replies.push({
      agent_steps: [
        step("api", "setSportAffinity"),
        step("nlg", "notify_setSportAffinity_success", "done , i added that team"),
        step("sys", "end_dialogue"),
      ],
      phase: "Ended",
    });
    api.prefs = [rec("sports", "the yankees")];
    await app.send("i love the yankees");
    const bubbles = [...root.querySelectorAll(".bubble")].map((b) => b.textContent);
    expect(bubbles).toEqual(["i love the yankees", "done , i added that team"]);
    expect(root.querySelector(".trace")).not.toBeNull();
    const panel = root.querySelector('ul[data-domain="sports"]')!;
    expect(panel.textContent).toContain("the yankees");
    // dialogue ended: input stays disabled
    expect(root.querySelector<HTMLInputElement>("#input")!.disabled).toBe(true);
  });

  it("disables send for empty input", async () => {
    await mountAndStart();
    const send = root.querySelector<HTMLButtonElement>("#send")!;
    expect(send.disabled).toBe(true);
    const input = root.querySelector<HTMLInputElement>("#input")!;
    input.value = "hello";
    input.dispatchEvent(new Event("input"));
    expect(send.disabled).toBe(false);
  });

  it("shows confirmation buttons only when a confirmation is pending", async () => {
    const app = await mountAndStart();
    expect(root.querySelector<HTMLDivElement>("#confirm-bar")!.hidden).toBe(true);
    api.replies.push({
      agent_steps: [
        step("api", "getAllAffinityAction"),
        step("nlg", "notify_getAllAffinityAction_success", "should i go ahead ?"),
        step("sys", "wait_for_user_input"),
      ],
      phase: "AwaitUser",
    });
    await app.send("forget everything you've learned about my preferences");
    expect(root.querySelector<HTMLDivElement>("#confirm-bar")!.hidden).toBe(false);

    api.replies.push({
      agent_steps: [
        step("api", "deleteAllAffinityAction"),
        step("nlg", "notify_deleteAllAffinityAction_success", "all gone"),
        step("sys", "end_dialogue"),
      ],
      phase: "Ended",
    });
    api.prefs = [];
    root.querySelector<HTMLButtonElement>("#confirm-yes")!.click();
    await flushTasks();
    await flushTasks();
    expect(api.sent).toContain("yes");
    expect(root.querySelector<HTMLDivElement>("#confirm-bar")!.hidden).toBe(true);
    expect(root.querySelector(".panel .empty")).not.toBeNull();
  });

  it("surfaces API errors as an inline banner", async () => {
    const app = await mountAndStart();
    api.failNext = new ApiError(409, "session busy");
    await app.send("hello there");
    const banner = root.querySelector<HTMLDivElement>("#banner")!;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain("409");
  });
});
