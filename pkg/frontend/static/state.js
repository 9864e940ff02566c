/**
 * Pure session state for the teaching console: the ordered transcript,
 * the preference panel mirror, input gating and the pending-confirmation
 * flag.  No DOM access here, so every transition is unit-testable.
 */
export function initialState() {
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
export function canSend(state, text) {
    return (state.sessionId !== null &&
        !state.inFlight &&
        state.phase === "AwaitUser" &&
        text.trim().length > 0);
}
export function beginSend(state, text) {
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
export function applyAgentTurn(state, response) {
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
export function applyError(state, message) {
    return { ...state, inFlight: false, phase: state.phase === "Ended" ? "Ended" : "AwaitUser", banner: message };
}
/**
 * The agent asks for confirmation before destructive calls: either a
 * confirm_<api> prompt or the get-all review question that precedes a
 * delete-all.  Nothing is pending once the dialogue has ended.
 */
export function detectPendingConfirmation(steps, phase) {
    if (phase !== "AwaitUser")
        return false;
    return steps.some((s) => s.kind === "nlg" &&
        (s.name.startsWith("confirm_") || s.name === "notify_getAllAffinityAction_success"));
}
export function applyPreferences(state, records) {
    const byDomain = new Map();
    for (const rec of records) {
        const group = byDomain.get(rec.domain) ?? [];
        group.push(rec);
        byDomain.set(rec.domain, group);
    }
    return { ...state, panel: { ...state.panel, byDomain } };
}
export function transcriptIsOrdered(state) {
    for (let i = 1; i < state.transcript.length; i++) {
        if (state.transcript[i].timestamp <= state.transcript[i - 1].timestamp)
            return false;
    }
    return true;
}
export function panelRows(state) {
    return [...state.panel.byDomain.entries()].sort(([a], [b]) => a.localeCompare(b));
}
