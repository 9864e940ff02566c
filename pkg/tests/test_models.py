import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefteach.encoder import (
    ContextEmbedding,
    ContextMention,
    ContextResult,
    EncoderConfig,
)
from prefteach.models import (
    MalformedTagsError,
    ModelBundle,
    NoLegalCandidateError,
    SchemaMismatchError,
    TrainConfig,
    af_fill,
    ap_predict,
    build_vocabulary,
    compile_dialogue,
    extract_steps,
    init_params,
    ner_decode,
    ner_feature_matrix,
    ner_loss_and_grad,
    train,
)
from prefteach.simulator import SimConfig, generate_corpus


@pytest.fixture(scope="module")
def tiny(schema, small_corpus):
    config = EncoderConfig(d=16)
    vocab = build_vocabulary(small_corpus, schema)
    params = init_params(vocab, schema, config, seed=1)
    return vocab, config, params


def _ce(params, d):
    rng = np.random.default_rng(0)
    return ContextEmbedding(c=rng.normal(size=5 * d), token_states=np.zeros((0, d)))


def test_ap_probs_sum_to_one(tiny, schema):
    vocab, config, params = tiny
    kinds = {name: kind for kind, name in schema.action_inventory()}
    ranked = ap_predict(_ce(params, config.d), params, vocab, kinds, n_best=len(vocab.actions), prob_floor=0.0)
    assert len(ranked) == len(vocab.actions)
    assert sum(p for _k, _n, p in ranked) == pytest.approx(1.0, abs=1e-6)
    probs = [p for _k, _n, p in ranked]
    assert probs == sorted(probs, reverse=True)


def test_ap_zero_weights_uniform(tiny, schema):
    vocab, config, params = tiny
    params = dict(params)
    params["ap.W"] = np.zeros_like(params["ap.W"])
    params["ap.b"] = np.zeros_like(params["ap.b"])
    kinds = {name: kind for kind, name in schema.action_inventory()}
    ranked = ap_predict(_ce(params, config.d), params, vocab, kinds, n_best=len(vocab.actions), prob_floor=0.0)
    n = len(vocab.actions)
    for _kind, _name, p in ranked:
        assert p == pytest.approx(1.0 / n, abs=1e-9)
    # ties broken lexicographically
    names = [name for _k, name, _p in ranked]
    assert names == sorted(names)


def test_ap_logit_shift_invariance(tiny, schema):
    vocab, config, params = tiny
    from prefteach.models import ap_logits
    from prefteach.nn import softmax

    ce = _ce(params, config.d)
    logits, _ = ap_logits(params, ce.c)
    probs = softmax(logits)
    shifted = softmax(logits + 13.7)
    assert np.allclose(probs, shifted, atol=1e-12)
    assert np.argmax(probs) == np.argmax(shifted)


def test_ap_n_best_floor(tiny, schema):
    vocab, config, params = tiny
    kinds = {name: kind for kind, name in schema.action_inventory()}
    ranked = ap_predict(_ce(params, config.d), params, vocab, kinds, n_best=4)
    assert 1 <= len(ranked) <= 4
    with pytest.raises(ValueError):
        ap_predict(_ce(params, config.d), params, vocab, kinds, n_best=0)


def _candidates():
    return [
        ContextMention("sport_team", "the giants", 0, (0, 2), 0),
        ContextMention("cuisine", "thai", 0, (3, 4), 0),
        ContextResult("getAllPreferenceResult1", "getAllPreferenceResult", "getAllAffinityAction", 0),
    ]


def test_af_masks_type_violations(tiny):
    vocab, config, params = tiny
    ce = _ce(params, config.d)
    cands = _candidates()
    chosen, probs = af_fill(ce, cands, "setSportAffinity", "sport_team", "sport_team", params, vocab)
    assert chosen is cands[0]
    assert probs[1] == 0.0 and probs[2] == 0.0
    assert probs[0] > 0.0


def test_af_no_legal_candidate(tiny):
    vocab, config, params = tiny
    ce = _ce(params, config.d)
    with pytest.raises(NoLegalCandidateError):
        af_fill(ce, [], "setSportAffinity", "sport_team", "sport_team", params, vocab)
    with pytest.raises(NoLegalCandidateError):
        af_fill(ce, [_candidates()[1]], "setSportAffinity", "sport_team", "sport_team", params, vocab)


def test_af_single_legal_candidate_chosen(tiny):
    vocab, config, params = tiny
    ce = _ce(params, config.d)
    cands = _candidates()
    chosen, probs = af_fill(ce, cands, "notify_getAllAffinityAction_success",
                            "getAllAffinityResult", "getAllPreferenceResult", params, vocab)
    assert chosen is cands[2]


@given(st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_af_masked_probability_exactly_zero(seed):
    # masking soundness under arbitrary scores: violating candidates get p == 0
    rng = np.random.default_rng(seed)
    probs = rng.random(5)
    legal = rng.random(5) < 0.5
    masked = np.where(legal, probs, 0.0)
    for i in range(5):
        if not legal[i]:
            assert masked[i] == 0.0
    if legal.any():
        assert legal[int(np.argmax(masked))]


def test_ner_malformed_tags_error(tiny, schema):
    vocab, config, params = tiny
    tokens = ("i", "love", "thai")
    cf = ner_feature_matrix(tokens, schema, config, True)
    i_tag = vocab.tags.index("I-cuisine")
    with pytest.raises(MalformedTagsError):
        ner_loss_and_grad([(tokens, [0, 0, 0, 0], cf)], params, vocab, None)  # length mismatch
    with pytest.raises(MalformedTagsError):
        ner_loss_and_grad([(tokens, [0, 0, i_tag], cf)], params, vocab, None)  # orphan I-


def test_ner_decode_empty_utterance(tiny):
    vocab, config, params = tiny
    assert ner_decode((), np.zeros((0, 1)), params, vocab) == []


def test_ner_decode_bio_wellformed_fuzz(tiny, schema):
    vocab, config, params = tiny
    rng = np.random.default_rng(0)
    corpus_tokens = sorted(vocab.tokens)
    for _ in range(300):
        n = int(rng.integers(1, 9))
        tokens = tuple(corpus_tokens[i] for i in rng.integers(0, len(corpus_tokens), size=n))
        cf = ner_feature_matrix(tokens, schema, config, True)
        mentions = ner_decode(tokens, cf, params, vocab)
        for m in mentions:
            assert 0 <= m.start < m.end <= n
        spans = sorted((m.start, m.end) for m in mentions)
        for (s1, e1), (s2, _e2) in zip(spans, spans[1:]):
            assert s2 >= e1  # no overlap


@pytest.fixture(scope="module")
def mini_bundle(schema):
    corpus, _ = generate_corpus(schema, SimConfig(n_dialogues=150, seed=9))
    return train(corpus, schema, TrainConfig(epochs=5, lr=3e-3, batch_size=4, seed=0, d=24))


def test_training_loss_mostly_decreasing(mini_bundle):
    curve = mini_bundle.loss_curve
    assert len(curve) == 5
    drops = sum(1 for a, b in zip(curve, curve[1:]) if b <= a)
    assert drops >= 3


def test_trained_ner_tags_catalog_phrase(mini_bundle, schema):
    tokens = tuple("i follow san francisco giants".split())
    mentions = mini_bundle.predict_entities(tokens, schema)
    assert any(m.entity_type == "sport_team" and (m.start, m.end) == (2, 5) for m in mentions)


def test_bundle_save_load_identical_predictions(tmp_path, mini_bundle, schema, small_corpus):
    path = tmp_path / "bundle.json"
    mini_bundle.save(path)
    loaded = ModelBundle.load(path)
    assert loaded.version == mini_bundle.version
    checked = 0
    for dlg in small_corpus:
        _utts, steps = extract_steps(dlg, schema, mini_bundle.encoder_config())
        for step in steps:
            ce_a, _ = mini_bundle.encode(step.state, schema)
            ce_b, _ = loaded.encode(step.state, schema)
            ra = mini_bundle.predict_actions(ce_a, n_best=3)
            rb = loaded.predict_actions(ce_b, n_best=3)
            assert ra == rb
            checked += 1
            if checked >= 100:
                return


def test_zero_epochs_bundle_is_initialization(schema, small_corpus):
    cfg = TrainConfig(epochs=0, seed=3, d=16)
    bundle = train(small_corpus, schema, cfg)
    vocab = build_vocabulary(small_corpus, schema)
    fresh = init_params(vocab, schema, EncoderConfig(d=16), seed=3)
    for name, arr in bundle.params.items():
        assert np.array_equal(arr, fresh[name])
    assert bundle.loss_curve == []


def test_bundle_version_field_mandatory(tmp_path, mini_bundle):
    import json

    path = tmp_path / "bundle.json"
    mini_bundle.save(path)
    payload = json.loads(path.read_text())
    del payload["version"]
    path.write_text(json.dumps(payload))
    with pytest.raises(ValueError, match="version"):
        ModelBundle.load(path)


def test_schema_fingerprint_check(mini_bundle, schema):
    mini_bundle.check_schema(schema)
    import dataclasses

    other = dataclasses.replace(schema, entity_types=schema.entity_types + ("extra_type",))
    with pytest.raises(SchemaMismatchError):
        mini_bundle.check_schema(other)


def test_fingerprint_stable_under_template_and_catalog_split(schema):
    from prefteach.simulator import split_out_of_sample

    train_schema, eval_schema = split_out_of_sample(schema, 0.25, seed=1)
    assert train_schema.fingerprint() == schema.fingerprint() == eval_schema.fingerprint()


def test_train_deterministic_given_seed(schema):
    corpus, _ = generate_corpus(schema, SimConfig(n_dialogues=40, seed=4))
    a = train(corpus, schema, TrainConfig(epochs=1, seed=11, d=16))
    b = train(corpus, schema, TrainConfig(epochs=1, seed=11, d=16))
    assert a.loss_curve == b.loss_curve
    for name in a.params:
        assert np.array_equal(a.params[name], b.params[name])
