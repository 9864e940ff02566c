import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from oracles import interpret_dialogue, interpret_goal, kb_to_state

from prefteach.kb import PreferenceKB
from prefteach.manager import (
    GoldOracle,
    MAX_AGENT_STEPS,
    Phase,
    PhaseError,
    UnconfirmedDestructiveOpError,
    UnknownApiError,
    execute_api,
    handle_utterance,
    open_session,
    transcript_record,
)
from prefteach.simulator import SimConfig, generate_corpus
from prefteach.types import (
    ActionKind,
    ActionRecord,
    ArgumentBinding,
    BindingSource,
)


def _api(name, **args):
    bindings = tuple(
        sorted((k, ArgumentBinding(source=BindingSource.CONSTANT, value=v)) for k, v in args.items())
    )
    return ActionRecord(kind=ActionKind.API, name=name, args=bindings)


@pytest.fixture
def kb(tmp_path):
    return PreferenceKB(tmp_path / "kb")


def test_open_session_empty_context():
    s = open_session("u1")
    assert s.phase is Phase.AWAIT_USER
    assert s.past_actions == [] and s.past_utterances == []


def test_open_session_distinct_ids():
    assert open_session("u1").session_id != open_session("u1").session_id


def test_open_session_ignores_stored_preferences(kb):
    kb.update_kb("u1", [__import__("prefteach.kb", fromlist=["upsert"]).upsert("u1", "sports", "sport_team", "the mets")])
    s = open_session("u1")
    assert s.all_mentions == [] and s.results == []


def test_execute_api_get_all_empty(kb, schema):
    payload, applied = execute_api(_api("getAllAffinityAction"), kb, "u1", schema)
    assert payload == [] and applied == 0


def test_execute_api_set_then_retrieve(kb, schema):
    execute_api(_api("setSportAffinity", sport_team="the warriors"), kb, "u1", schema)
    payload, _ = execute_api(_api("getAllAffinityAction"), kb, "u1", schema)
    assert [r.entity_value for r in payload] == ["the warriors"]
    payload, _ = execute_api(_api("getSportAffinity"), kb, "u1", schema)
    assert [r.entity_value for r in payload] == ["the warriors"]


def test_execute_api_conditional_preference(kb, schema):
    execute_api(
        _api("setWeatherProviderAffinity", weather_provider="big sky", weather_condition="weather update"),
        kb, "u1", schema,
    )
    rec = kb.retrieve_kb("u1")[0]
    assert rec.polarity == "conditional" and rec.condition == "weather update"


def test_execute_api_unconfirmed_destructive(kb, schema):
    with pytest.raises(UnconfirmedDestructiveOpError):
        execute_api(_api("deleteAllAffinityAction"), kb, "u1", schema)
    with pytest.raises(UnconfirmedDestructiveOpError):
        execute_api(_api("deleteSportAffinity", sport_team="the mets"), kb, "u1", schema)


def test_execute_api_unknown_name(kb, schema):
    with pytest.raises(UnknownApiError):
        execute_api(_api("ghostApi"), kb, "u1", schema)


def test_gold_replay_matches_interpreters(schema, tmp_path):
    dialogues, _ = generate_corpus(schema, SimConfig(n_dialogues=120, seed=31))
    for i, dlg in enumerate(dialogues):
        kb = PreferenceKB(tmp_path / f"kb{i}")
        oracle = GoldOracle(dlg)
        session = open_session("u")
        for turn in dlg.turns:
            steps = handle_utterance(session, turn.seeker_utterance.text, oracle, schema, kb)
            assert [s.action.name for s in steps] == [a.name for a in turn.provider_actions]
        assert session.phase is Phase.ENDED
        got = kb_to_state(kb.retrieve_kb("u"))
        want_goal = interpret_goal(dlg.goal, schema)
        want_dialogue = interpret_dialogue(dlg, schema)
        got_no_ts = {k: v for k, v in got.items()}
        assert got_no_ts == want_goal == want_dialogue, dlg.dialogue_id


def test_phase_error_after_end(schema, tmp_path):
    dialogues, _ = generate_corpus(schema, SimConfig(n_dialogues=1, seed=8))
    dlg = dialogues[0]
    kb = PreferenceKB(tmp_path / "kb")
    oracle = GoldOracle(dlg)
    session = open_session("u")
    for turn in dlg.turns:
        handle_utterance(session, turn.seeker_utterance.text, oracle, schema, kb)
    assert session.phase is Phase.ENDED
    with pytest.raises(PhaseError):
        handle_utterance(session, "hello again", oracle, schema, kb)


def test_bounded_loop_with_looping_predictor(schema, kb):
    class LoopingPredictor:
        def encoder_config(self):
            from prefteach.encoder import EncoderConfig

            return EncoderConfig()

        def encode(self, state, schema):
            return None, None

        def predict_entities(self, tokens, schema):
            return []

        def predict_actions(self, ce, n_best=None):
            return [(ActionKind.NLG, "prompt_setup_preference", 0.99)]

        def fill_argument(self, *a, **k):
            raise AssertionError("not needed")

    session = open_session("u")
    steps = handle_utterance(session, "hello", LoopingPredictor(), schema, kb)
    assert len(steps) <= MAX_AGENT_STEPS + 2  # bounded + fallback clarification pair
    assert steps[-1].action.kind is ActionKind.SYS
    assert session.phase is Phase.AWAIT_USER


def test_low_confidence_falls_back_to_clarification(schema, kb):
    class TimidPredictor:
        def encoder_config(self):
            from prefteach.encoder import EncoderConfig

            return EncoderConfig()

        def encode(self, state, schema):
            return None, None

        def predict_entities(self, tokens, schema):
            return []

        def predict_actions(self, ce, n_best=None):
            return [(ActionKind.API, "setSportAffinity", 0.05)]

        def fill_argument(self, *a, **k):
            raise AssertionError("not reached")

    session = open_session("u")
    steps = handle_utterance(session, "mumble", TimidPredictor(), schema, kb)
    assert steps[0].action.kind is ActionKind.NLG
    assert steps[-1].action.name == "wait_for_user_input"


PHASE_CALLS = st.lists(st.sampled_from(["utter", "utter", "end_check"]), max_size=8)


@given(PHASE_CALLS)
@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
def test_phase_machine_safety(tmp_path_factory, schema, calls):
    """Random public call sequences never violate the phase transition relation."""

    class WaitPredictor:
        def encoder_config(self):
            from prefteach.encoder import EncoderConfig

            return EncoderConfig()

        def encode(self, state, schema):
            return None, None

        def predict_entities(self, tokens, schema):
            return []

        def predict_actions(self, ce, n_best=None):
            return [(ActionKind.SYS, "wait_for_user_input", 1.0)]

        def fill_argument(self, *a, **k):
            raise AssertionError

    kb = PreferenceKB(tmp_path_factory.mktemp("kb"))
    session = open_session("u")
    for call in calls:
        before = session.phase
        if call == "utter":
            if before is Phase.AWAIT_USER:
                handle_utterance(session, "hi", WaitPredictor(), schema, kb)
                assert session.phase in (Phase.AWAIT_USER, Phase.ENDED)
            else:
                with pytest.raises(PhaseError):
                    handle_utterance(session, "hi", WaitPredictor(), schema, kb)
                assert session.phase is before
        else:
            assert session.phase in (Phase.AWAIT_USER, Phase.AGENT_ACTING, Phase.ENDED)


def test_teaching_then_reuse_across_sessions(schema, quick_bundle, tmp_path):
    kb = PreferenceKB(tmp_path / "kb", entity_types=schema.entity_types)
    s1 = open_session("casey", seed=1)
    steps = handle_utterance(s1, "i love the yankees", quick_bundle, schema, kb)
    names = [s.action.name for s in steps]
    assert "setSportAffinity" in names
    records = kb.retrieve_kb("casey")
    assert any(r.entity_value == "the yankees" and r.domain == "sports" for r in records)

    s2 = open_session("casey", seed=2)
    steps2 = handle_utterance(s2, "what are my favorite teams", quick_bundle, schema, kb)
    get_step = next(s for s in steps2 if s.action.name == "getSportAffinity")
    nlg = next(s for s in steps2 if s.action.kind is ActionKind.NLG)
    assert "the yankees" in (nlg.text or "")


def test_transcript_record_round_trips_when_ended(schema, tmp_path):
    dialogues, _ = generate_corpus(schema, SimConfig(n_dialogues=1, seed=12))
    dlg = dialogues[0]
    kb = PreferenceKB(tmp_path / "kb")
    oracle = GoldOracle(dlg)
    session = open_session("u")
    for turn in dlg.turns:
        handle_utterance(session, turn.seeker_utterance.text, oracle, schema, kb)
    record = transcript_record(session)
    from prefteach.types import Dialogue

    parsed = Dialogue.from_json(record)
    assert [a.name for a in parsed.actions] == [a.name for a in dlg.actions]
