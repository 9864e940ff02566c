import numpy as np
import pytest

from prefteach.encoder import EncoderConfig
from prefteach.evalharness import ROWS, build_eval_sets, evaluate
from prefteach.models import extract_steps
from prefteach.simulator import SimConfig, generate_corpus
from prefteach.types import (
    ActionKind,
    ActionRecord,
    ArgumentBinding,
    BindingSource,
    Dialogue,
    EntityMention,
    EntityTransferGraph,
    Speaker,
    Turn,
    Utterance,
)


class OraclePredictor:
    """Replays gold annotations; flips specific predictions when told to."""

    def __init__(self, corpus, schema, wrong_action_steps=(), wrong_ner_turns=(),
                 wrong_af_steps=()):
        self.wrong_action_steps = set(wrong_action_steps)
        self.wrong_ner_turns = set(wrong_ner_turns)
        self.wrong_af_steps = set(wrong_af_steps)
        self.gold_by_state = {}
        self.ner_by_tokens = {}
        self.step_counter = 0
        self.utt_counter = -1
        self.schema = schema
        self.corpus = list(corpus)
        self._steps = []
        self._utts = []
        for dlg in self.corpus:
            utts, steps = extract_steps(dlg, schema, EncoderConfig())
            self._utts.extend(utts)
            self._steps.extend(steps)

    def encoder_config(self):
        return EncoderConfig()

    def encode(self, state, schema):
        return None, None

    def predict_entities(self, tokens, schema):
        self.utt_counter += 1
        ue = self._utts[self.utt_counter]
        spans = list(ue.gold_spans)
        if self.utt_counter in self.wrong_ner_turns:
            spans = []
        return [
            EntityMention(start=s, end=e, entity_type=t, value=" ".join(tokens[s:e]))
            for s, e, t in spans
        ]

    def predict_actions(self, ce, n_best=None):
        step = self._steps[self.step_counter]
        self.step_counter += 1
        if self.step_counter - 1 in self.wrong_action_steps:
            return [(ActionKind.SYS, "wait_for_user_input"
                     if step.gold_name != "wait_for_user_input" else "end_dialogue", 1.0)]
        return [(step.gold_kind, step.gold_name, 1.0)]

    def fill_argument(self, ce, state, action_name, arg_name, arg_type):
        step = self._steps[self.step_counter - 1]
        gold_key = dict(((a, t), k) for a, t, k in
                        [(g[0], g[1], g[2]) for g in step.gold_args])[(arg_name, arg_type)]
        cands = state.candidates()
        if self.step_counter - 1 in self.wrong_af_steps:
            for cand in cands:
                if cand.key != gold_key:
                    return cand, None
        for cand in cands:
            if cand.key == gold_key:
                return cand, None
        raise AssertionError("gold candidate missing")


def test_gold_oracle_scores_perfectly(schema):
    corpus, _ = generate_corpus(schema, SimConfig(n_dialogues=25, seed=6))
    report = evaluate(corpus, OraclePredictor(corpus, schema), schema)
    for row in ROWS:
        assert report.per_turn[row] == 1.0
        assert report.per_action[row] == 1.0
    assert set(report.per_turn) == set(ROWS)


def _fixture_corpus(schema):
    """Hand-built 2-turn dialogue: turn 1 has 3 actions, turn 2 has 2."""

    def utt(text):
        return Utterance.from_text(text, Speaker.SEEKER)

    turn1 = Turn(
        seeker_utterance=utt("what are my preferences"),
        seeker_entities=(),
        seeker_acts=("inform_getAllAffinityAction",),
        provider_actions=(
            ActionRecord(kind=ActionKind.API, name="getAllAffinityAction",
                         result_ref="getAllPreferenceResult1"),
            ActionRecord(
                kind=ActionKind.NLG, name="notify_getAllAffinityAction_success",
                args=(("getAllAffinityResult",
                       ArgumentBinding(BindingSource.API_RESULT, "getAllPreferenceResult1",
                                       result_ref="getAllPreferenceResult1")),),
            ),
            ActionRecord(kind=ActionKind.SYS, name="wait_for_user_input"),
        ),
    )
    turn2 = Turn(
        seeker_utterance=utt("yes"),
        seeker_entities=(EntityMention(0, 1, "confirmation", "yes"),),
        seeker_acts=("confirm",),
        provider_actions=(
            ActionRecord(
                kind=ActionKind.API, name="deleteAllAffinityAction",
                args=(("confirmAction",
                       ArgumentBinding(BindingSource.SEEKER_ENTITY, "yes", turn_index=1, span=(0, 1))),),
                result_ref="deleteAllPreferenceResult1",
            ),
            ActionRecord(kind=ActionKind.SYS, name="end_dialogue"),
        ),
    )
    return [Dialogue(dialogue_id="fixture", goal=EntityTransferGraph((), ()), turns=(turn1, turn2))]


def test_counting_fixture_ap_four_fifths(schema):
    corpus = _fixture_corpus(schema)
    # 5 actions total; mispredict exactly one action in turn 2 (step index 3)
    predictor = OraclePredictor(corpus, schema, wrong_action_steps={3})
    report = evaluate(corpus, predictor, schema)
    assert report.per_action["AP"] == pytest.approx(4 / 5)
    assert report.per_turn["AP"] == pytest.approx(1 / 2)
    assert report.per_turn["NER"] == 1.0
    assert report.per_action["AF"] == 1.0
    assert report.per_turn["AP+AF"] == pytest.approx(1 / 2)
    assert report.per_turn["NER+AP+AF"] == pytest.approx(1 / 2)


def test_counting_fixture_ner_and_af_cells(schema):
    corpus = _fixture_corpus(schema)
    # break NER on the second utterance and AF on the delete action
    predictor = OraclePredictor(corpus, schema, wrong_ner_turns={1}, wrong_af_steps={3})
    report = evaluate(corpus, predictor, schema)
    assert report.per_turn["NER"] == pytest.approx(1 / 2)
    assert report.per_action["NER"] == pytest.approx(0.0)  # 1 gold entity, missed
    assert report.per_action["AF"] == pytest.approx(4 / 5)
    assert report.per_turn["AF"] == pytest.approx(1 / 2)
    assert report.per_action["AP"] == 1.0
    assert report.per_turn["NER+AP+AF"] == pytest.approx(1 / 2)


def test_report_rows_match_table_layout(schema):
    corpus = _fixture_corpus(schema)
    report = evaluate(corpus, OraclePredictor(corpus, schema), schema)
    table = report.table()
    for row in ("NER", "AP", "AF", "AP+AF", "NER+AP+AF"):
        assert row in table
    assert "ACC per-turn" in table and "ACC per-action" in table


def test_end_to_end_row_bounded_by_components(schema):
    corpus, _ = generate_corpus(schema, SimConfig(n_dialogues=30, seed=44))
    rng = np.random.default_rng(0)
    n_steps = sum(len(d.actions) for d in corpus)
    wrong = set(rng.choice(n_steps, size=12, replace=False).tolist())
    predictor = OraclePredictor(corpus, schema, wrong_action_steps=wrong, wrong_ner_turns={0, 4})
    report = evaluate(corpus, predictor, schema)
    for level in (report.per_turn, report.per_action):
        assert level["NER+AP+AF"] <= min(level["NER"], level["AP"], level["AF"]) + 1e-12


def test_evaluation_is_pure(schema):
    corpus, _ = generate_corpus(schema, SimConfig(n_dialogues=10, seed=3))
    a = evaluate(corpus, OraclePredictor(corpus, schema), schema).to_json()
    b = evaluate(corpus, OraclePredictor(corpus, schema), schema).to_json()
    assert a == b


def test_build_eval_sets_shapes(schema):
    sets = build_eval_sets(schema, n_train=40, n_eval=12, seed=5)
    assert len(sets.train_corpus) == 40
    assert len(sets.in_sample) == 12
    assert len(sets.out_of_sample) == 12
    table = sets.stats_table()
    assert "[train]" in table and "[out_of_sample]" in table
    train_templates = {(t.act, t.text) for t in sets.train_schema.seeker_templates}
    eval_templates = {(t.act, t.text) for t in sets.eval_schema.seeker_templates}
    assert not (train_templates & eval_templates)
