"""Multi-turn action prediction loop: per-session context storage, the
NER -> AP -> AF step cycle, API execution against the preference KB, NLG
rendering, and control handoff on SYS actions.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .encoder import ContextMention, ContextResult, DialogState
from .kb import KbDelta, PreferenceKB, PreferenceRecord, delete_all
from .models import NoLegalCandidateError, binding_key
from .simulator import CLARIFY_GENERIC, request_act
from .types import (
    ActionKind,
    ActionRecord,
    ActionSignature,
    ArgumentBinding,
    BindingSource,
    DomainSchema,
    EntityMention,
    Speaker,
    SYS_END,
    SYS_WAIT,
    Utterance,
    join_tokens,
    tokenize,
)

MAX_AGENT_STEPS = 8
UNCERTAINTY_THRESHOLD = 0.3


class Phase(str, Enum):
    AWAIT_USER = "AwaitUser"
    AGENT_ACTING = "AgentActing"
    ENDED = "Ended"


class PhaseError(RuntimeError):
    pass


class UnknownApiError(ValueError):
    pass


class UnconfirmedDestructiveOpError(ValueError):
    pass


_session_counter = itertools.count(1)


@dataclass
class AgentStep:
    action: ActionRecord
    confidence: float
    n_best: list[tuple[ActionKind, str, float]] = field(default_factory=list)
    kb_applied: int = 0
    text: Optional[str] = None  # rendered surface, NLG only


@dataclass
class SessionState:
    session_id: str
    user_id: str
    phase: Phase = Phase.AWAIT_USER
    turn_count: int = 0
    past_utterances: list = field(default_factory=list)
    all_mentions: list = field(default_factory=list)
    past_actions: list = field(default_factory=list)
    results: list = field(default_factory=list)  # (handle, rtype, producer, turn_idx)
    result_values: dict = field(default_factory=dict)
    result_counters: dict = field(default_factory=dict)
    turns_record: list = field(default_factory=list)  # corpus-format turn dicts
    lock: threading.Lock = field(default_factory=threading.Lock)
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))


def open_session(user_id: str, seed: int = 0) -> SessionState:
    """Fresh empty context store; stored preferences live in the KB, not here."""
    sid = f"session-{next(_session_counter)}"
    return SessionState(session_id=sid, user_id=user_id, rng=np.random.default_rng(seed))


def _dialog_state(state: SessionState, cur_tokens, cur_mentions, window_u: int, window_a: int) -> DialogState:
    ti = state.turn_count
    return DialogState(
        cur_tokens=tuple(cur_tokens),
        cur_mentions=tuple(cur_mentions),
        past_utterances=tuple(state.past_utterances[-window_u:]),
        past_mentions=tuple(
            ContextMention(m.entity_type, m.value, m.turn_index, m.span, age=ti - m.turn_index)
            for m in state.all_mentions
        ),
        past_actions=tuple(state.past_actions[-window_a:]),
        results=tuple(
            ContextResult(h, rt, prod, age=ti - rturn) for h, rt, prod, rturn in state.results
        ),
    )


def render_result(payload) -> str:
    """Human-readable summary of an API result for NLG slots."""
    if payload is None:
        return "done"
    if isinstance(payload, list):
        if not payload:
            return "nothing yet"
        return " ; ".join(f"{r.domain} {r.entity_value} ( {r.polarity} )" for r in payload)
    return str(payload)


def execute_api(
    action: ActionRecord,
    kb: PreferenceKB,
    user_id: str,
    schema: DomainSchema,
) -> tuple[object, int]:
    """Map an API action onto the KB contract; returns (payload, applied count).

    Destructive operations require a bound confirmation argument.
    """
    if action.kind is not ActionKind.API:
        raise UnknownApiError(f"{action.name} is not an API action")
    try:
        sig = schema.signature(action.name)
    except KeyError as e:
        raise UnknownApiError(f"unknown API {action.name!r}") from e
    args = action.arg_map
    if sig.destructive:
        conf_names = [a.name for a in sig.arguments if a.arg_type == "confirmation"]
        if not conf_names or conf_names[0] not in args:
            raise UnconfirmedDestructiveOpError(
                f"{sig.name} is destructive and requires a bound confirmation argument"
            )

    if sig.kb_op == "retrieve":
        records = kb.retrieve_kb(user_id, domain=sig.domain)
        return records, 0
    if sig.kb_op == "delete_all":
        applied = kb.update_kb(user_id, [delete_all()])
        return None, applied
    if sig.kb_op in ("upsert", "delete"):
        value = args[sig.value_arg].value if sig.value_arg else None
        if value is None:
            raise UnknownApiError(f"{sig.name} has no bound value argument")
        condition = args[sig.condition_arg].value if sig.condition_arg and sig.condition_arg in args else None
        etype = next(a.arg_type for a in sig.arguments if a.name == sig.value_arg)
        record = PreferenceRecord(
            user_id=user_id,
            domain=sig.domain or "general",
            entity_type=etype,
            entity_value=value,
            polarity=sig.polarity or "like",
            condition=condition,
        )
        applied = kb.update_kb(user_id, [KbDelta(sig.kb_op, record)])
        return None, applied
    return None, 0  # kb_op none: side-effect free API


def _new_handle(state: SessionState, sig: ActionSignature) -> str:
    state.result_counters[sig.produces] = state.result_counters.get(sig.produces, 0) + 1
    return f"{sig.produces}{state.result_counters[sig.produces]}"


def handle_utterance(
    state: SessionState,
    text: str,
    bundle,
    schema: DomainSchema,
    kb: PreferenceKB,
    max_agent_steps: int = MAX_AGENT_STEPS,
) -> list[AgentStep]:
    """Run the agent loop for one user utterance.

    NER appends current entities to the context; then the loop encodes the
    context, takes the top action, fills arguments, executes/renders, and
    updates the context store after every step until a SYS action hands
    control back or the step bound trips (fallback clarification + wait).
    """
    if state.phase is not Phase.AWAIT_USER:
        raise PhaseError(f"cannot accept an utterance in phase {state.phase.value}")
    state.phase = Phase.AGENT_ACTING

    tokens = tuple(tokenize(text))
    predicted = bundle.predict_entities(tokens, schema)
    ti = state.turn_count
    cur_mentions = tuple(
        ContextMention(m.entity_type, m.value, ti, m.span, age=0) for m in predicted
    )
    enc_config = bundle.encoder_config()
    steps: list[AgentStep] = []

    def emit(step: AgentStep) -> None:
        steps.append(step)
        state.past_actions.append(step.action.name)

    def fallback_clarify(act_name: str) -> None:
        templates = schema.templates_for(act_name, bank="provider")
        if not templates:
            act_name = CLARIFY_GENERIC
            templates = schema.templates_for(act_name, bank="provider")
        idx = int(state.rng.integers(len(templates)))
        rendered = templates[idx].text if templates else "could you rephrase that ?"
        emit(AgentStep(
            action=ActionRecord(kind=ActionKind.NLG, name=act_name, text=rendered),
            confidence=0.0, text=rendered,
        ))
        emit(AgentStep(action=ActionRecord(kind=ActionKind.SYS, name=SYS_WAIT), confidence=0.0))
        state.phase = Phase.AWAIT_USER

    for _step_i in range(max_agent_steps):
        dstate = _dialog_state(state, tokens, cur_mentions, enc_config.past_utterance_window,
                               enc_config.past_action_window)
        ce, _cache = bundle.encode(dstate, schema)
        ranked = bundle.predict_actions(ce)
        kind, name, prob = ranked[0]
        if prob < UNCERTAINTY_THRESHOLD:
            fallback_clarify(CLARIFY_GENERIC)
            break

        if kind is ActionKind.SYS:
            emit(AgentStep(action=ActionRecord(kind=kind, name=name), confidence=prob, n_best=ranked))
            state.phase = Phase.ENDED if name == SYS_END else Phase.AWAIT_USER
            break

        sig = schema.signature(name)
        bindings: dict[str, ArgumentBinding] = {}
        failed_arg = None
        for arg in sig.required_args():
            try:
                cand, _probs = bundle.fill_argument(ce, dstate, name, arg.name, arg.arg_type)
            except NoLegalCandidateError:
                failed_arg = arg
                break
            bindings[arg.name] = _candidate_binding(cand)
        if failed_arg is not None:
            fallback_clarify(request_act(failed_arg.arg_type))
            break

        if kind is ActionKind.API:
            action = ActionRecord(
                kind=kind, name=name, args=tuple(sorted(bindings.items())),
                result_ref=_new_handle(state, sig) if sig.produces else None,
            )
            payload, applied = execute_api(action, kb, state.user_id, schema)
            if action.result_ref:
                state.results.append((action.result_ref, sig.produces, name, ti))
                state.result_values[action.result_ref] = payload
            emit(AgentStep(action=action, confidence=prob, n_best=ranked, kb_applied=applied))
        else:  # NLG
            slot_values = {}
            for arg_name, binding in bindings.items():
                if binding.source is BindingSource.API_RESULT:
                    slot_values[arg_name] = render_result(state.result_values.get(binding.result_ref))
                else:
                    slot_values[arg_name] = binding.value
            templates = schema.templates_for(name, bank="provider")
            idx = int(state.rng.integers(len(templates))) if templates else 0
            try:
                rendered_tokens = _fill(templates[idx].text, slot_values) if templates else name
            except KeyError:
                rendered_tokens = name
            action = ActionRecord(
                kind=kind, name=name, args=tuple(sorted(bindings.items())), text=rendered_tokens,
            )
            emit(AgentStep(action=action, confidence=prob, n_best=ranked, text=rendered_tokens))
    else:
        fallback_clarify(CLARIFY_GENERIC)

    state.past_utterances.append(tokens)
    state.all_mentions.extend(cur_mentions)
    state.turn_count += 1
    state.turns_record.append(_turn_record(text, tokens, cur_mentions, steps))
    return steps


def _fill(template_text: str, slot_values: dict[str, str]) -> str:
    out = template_text
    for k, v in slot_values.items():
        out = out.replace("{" + k + "}", v)
    if "{" in out:
        raise KeyError(f"unfilled slot in {template_text!r}")
    return out


def _candidate_binding(cand) -> ArgumentBinding:
    if isinstance(cand, ContextMention):
        return ArgumentBinding(
            source=BindingSource.SEEKER_ENTITY, value=cand.value,
            turn_index=cand.turn_index, span=cand.span,
        )
    return ArgumentBinding(source=BindingSource.API_RESULT, value=cand.handle, result_ref=cand.handle)


def _turn_record(text: str, tokens, mentions, steps: list[AgentStep]) -> dict:
    """Corpus-format record of one live turn (matches Turn.to_json shape)."""
    return {
        "user": {
            "utterance": {"text": text, "tokens": list(tokens), "speaker": Speaker.SEEKER.value},
            "entities": [
                {"span": list(m.span), "entity_type": m.entity_type, "value": m.value} for m in mentions
            ],
            "user_nlgs": [],
        },
        "actions": [s.action.to_json() for s in steps],
    }


def transcript_record(state: SessionState, dialogue_id: Optional[str] = None) -> dict:
    """Whole-session export in the corpus record format (one JSON object)."""
    return {
        "id": dialogue_id or state.session_id,
        "goal": {"vertices": [], "edges": []},
        "turns": list(state.turns_record),
        "metadata": {"source": "live", "user_id": state.user_id},
    }


class GoldOracle:
    """Predictor that replays a gold dialogue's annotations (bypasses models).

    Drives the manager exactly along the annotated action sequence, which makes
    KB end-state comparison against an independent interpreter meaningful.
    """

    def __init__(self, dialogue, bundle_config=None):
        self.dialogue = dialogue
        self.turn_i = 0
        self.action_j = 0

    def encoder_config(self):
        from .encoder import EncoderConfig

        return EncoderConfig()

    def encode(self, state, schema):
        return None, None

    def predict_entities(self, tokens, schema) -> list[EntityMention]:
        turn = self.dialogue.turns[self.turn_i]
        return list(turn.seeker_entities)

    def predict_actions(self, ce, n_best: Optional[int] = None):
        turn = self.dialogue.turns[self.turn_i]
        action = turn.provider_actions[self.action_j]
        self.action_j += 1
        if self.action_j >= len(turn.provider_actions):
            self.turn_i += 1
            self.action_j = 0
        return [(action.kind, action.name, 1.0)]

    def fill_argument(self, ce, state: DialogState, action_name: str, arg_name: str, arg_type: str):
        turn_i = self.turn_i
        action_j = self.action_j - 1
        if action_j < 0:
            turn_i -= 1
            action_j = len(self.dialogue.turns[turn_i].provider_actions) - 1
        action = self.dialogue.turns[turn_i].provider_actions[action_j]
        gold = dict(action.args)[arg_name]
        key = binding_key(gold)
        for cand in state.candidates():
            if cand.key == key:
                return cand, None
        raise NoLegalCandidateError(f"gold binding {key} not present in live context")
