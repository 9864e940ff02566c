/**
 * Pure session state for the teaching console: the ordered transcript,
 * the preference panel mirror, input gating and the pending-confirmation
 * flag.  No DOM access here, so every transition is unit-testable.
 */

import type { AgentStep, PreferenceRecord, UtteranceResponse } from "./api.js";

export interface TranscriptEntry {
  speaker: "user" | "agent";
  text: string;
  trace: AgentStep[]; // collapsed step trace; non-empty for agent entries
  timestamp: number;
}

export interface PreferencePanelState {
  byDomain: Map<string, PreferenceRecord[]>;
  pendingConfirmation: boolean;
}

export interface SessionViewState {
  sessionId: string | null;
  phase: "AwaitUser" | "AgentActing" | "Ended";
  inFlight: boolean;
  transcript: TranscriptEntry[];
  panel: PreferencePanelState;
  banner: string | null;
  seq: number; // strictly increasing entry ordinal
}

export function initialState(): SessionViewState {
  return {
    sessionId: null,
    phase: "AwaitUser",
    inFlight: false,
    transcript: [],
    panel: { byDomain: new Map(), pendingConfirmation: false },
    banner: null,
    seq: 0,
  };
}

export function canSend(state: SessionViewState, text: string): boolean {
  return (
    state.sessionId !== null &&
    !state.inFlight &&
    state.phase === "AwaitUser" &&
    text.trim().length > 0
  );
}

export function beginSend(state: SessionViewState, text: string): SessionViewState {
  const seq = state.seq + 1;
  return {
    ...state,
    seq,
    inFlight: true,
    phase: "AgentActing",
    banner: null,
    transcript: [
      ...state.transcript,
      { speaker: "user", text, trace: [], timestamp: seq },
    ],
  };
}

/** Agent utterance lines come from NLG steps; the whole step list is the trace. */
export function applyAgentTurn(
  state: SessionViewState,
  response: UtteranceResponse,
): SessionViewState {
  const lines = response.agent_steps.filter((s) => s.kind === "nlg" && s.text);
  const text = lines.map((s) => s.text).join(" ") || "(no reply)";
  const seq = state.seq + 1;
  return {
    ...state,
    seq,
    inFlight: false,
    phase: response.phase,
    transcript: [
      ...state.transcript,
      { speaker: "agent", text, trace: response.agent_steps, timestamp: seq },
    ],
    panel: {
      ...state.panel,
      pendingConfirmation: detectPendingConfirmation(response.agent_steps, response.phase),
    },
  };
}

export function applyError(state: SessionViewState, message: string): SessionViewState {
  return { ...state, inFlight: false, phase: state.phase === "Ended" ? "Ended" : "AwaitUser", banner: message };
}

/**
 * The agent asks for confirmation before destructive calls: either a
 * confirm_<api> prompt or the get-all review question that precedes a
 * delete-all.  Nothing is pending once the dialogue has ended.
 */
export function detectPendingConfirmation(
  steps: AgentStep[],
  phase: UtteranceResponse["phase"],
): boolean {
  if (phase !== "AwaitUser") return false;
  return steps.some(
    (s) =>
      s.kind === "nlg" &&
      (s.name.startsWith("confirm_") || s.name === "notify_getAllAffinityAction_success"),
  );
}

export function applyPreferences(
  state: SessionViewState,
  records: PreferenceRecord[],
): SessionViewState {
  const byDomain = new Map<string, PreferenceRecord[]>();
  for (const rec of records) {
    const group = byDomain.get(rec.domain) ?? [];
    group.push(rec);
    byDomain.set(rec.domain, group);
  }
  return { ...state, panel: { ...state.panel, byDomain } };
}

export function transcriptIsOrdered(state: SessionViewState): boolean {
  for (let i = 1; i < state.transcript.length; i++) {
    if (state.transcript[i].timestamp <= state.transcript[i - 1].timestamp) return false;
  }
  return true;
}

export function panelRows(state: SessionViewState): [string, PreferenceRecord[]][] {
  return [...state.panel.byDomain.entries()].sort(([a], [b]) => a.localeCompare(b));
}
