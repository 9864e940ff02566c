"""The three conversation-understanding models and their joint trainer:

  NER  -- BiGRU emissions over token embeddings + flattened catalog features,
          linear-chain CRF decoding and likelihood
  AP   -- softmax(relu(W C + b)) over the full action inventory
  AF   -- additive attention over typed context candidates, sigmoid scores,
          type-violating candidates masked to exactly 0

All gradients are hand-derived; the finite-difference suite pins them.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import crf
from .encoder import (
    AGE_BUCKETS,
    ContextEmbedding,
    ContextMention,
    ContextResult,
    DialogState,
    EncodeCache,
    EncoderConfig,
    OOV,
    PROVENANCE,
    Vocabulary,
    catalog_features,
    encode_backward,
    encode_context,
    mention_repr,
)
from .nn import (
    Adam,
    Grads,
    Params,
    accumulate,
    bigru_backward,
    bigru_forward,
    glorot,
    init_gru,
    sigmoid,
    softmax,
)
from .types import (
    ActionKind,
    ActionRecord,
    BindingSource,
    Dialogue,
    DomainSchema,
    EntityMention,
    tokenize,
)

BUNDLE_VERSION = 1


class SchemaMismatchError(ValueError):
    pass


class NoLegalCandidateError(ValueError):
    """No context candidate satisfies the argument's type constraint."""


class MalformedTagsError(ValueError):
    pass


class AnnotationGapError(ValueError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 5
    lr: float = 1e-3
    batch_size: int = 16
    seed: int = 0
    catalog_features: bool = True
    d: int = 32
    n_best: int = 4
    prob_floor: float = 0.01

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "TrainConfig":
        return cls(**d)


# ---------------------------------------------------------------------------
# teacher-forced step extraction (single source of truth for train + eval)


@dataclass(frozen=True)
class StepExample:
    state: DialogState
    gold_kind: ActionKind
    gold_name: str
    gold_args: tuple[tuple[str, str, tuple], ...]  # (arg_name, arg_type, gold candidate key)


@dataclass(frozen=True)
class UtteranceExample:
    turn_index: int
    tokens: tuple[str, ...]
    gold_spans: tuple[tuple[int, int, str], ...]


def binding_key(binding) -> tuple:
    if binding.source is BindingSource.SEEKER_ENTITY:
        return ("mention", binding.turn_index, tuple(binding.span))
    if binding.source is BindingSource.API_RESULT:
        return ("result", binding.result_ref)
    return ("constant", binding.value)


def extract_steps(
    dialogue: Dialogue,
    schema: DomainSchema,
    config: EncoderConfig,
) -> tuple[list[UtteranceExample], list[StepExample]]:
    """Replay a gold dialogue into per-utterance NER examples and per-action
    (AP + AF) examples with the context state each prediction conditions on."""
    utt_examples: list[UtteranceExample] = []
    step_examples: list[StepExample] = []
    past_utts: list[tuple[str, ...]] = []
    all_mentions: list[ContextMention] = []
    past_actions: list[str] = []
    raw_results: list[tuple[str, str, str, int]] = []  # handle, type, producer, turn

    for ti, turn in enumerate(dialogue.turns):
        cur_tokens = turn.seeker_utterance.tokens
        cur_mentions = tuple(
            ContextMention(m.entity_type, m.value, ti, m.span, age=0) for m in turn.seeker_entities
        )
        utt_examples.append(
            UtteranceExample(
                turn_index=ti,
                tokens=cur_tokens,
                gold_spans=tuple((m.start, m.end, m.entity_type) for m in turn.seeker_entities),
            )
        )
        past_mentions = tuple(
            ContextMention(m.entity_type, m.value, m.turn_index, m.span, age=ti - m.turn_index)
            for m in all_mentions
        )
        for action in turn.provider_actions:
            state = DialogState(
                cur_tokens=cur_tokens,
                cur_mentions=cur_mentions,
                past_utterances=tuple(past_utts[-config.past_utterance_window :]),
                past_mentions=past_mentions,
                past_actions=tuple(past_actions[-config.past_action_window :]),
                results=tuple(
                    ContextResult(h, rt, prod, age=ti - rturn) for h, rt, prod, rturn in raw_results
                ),
            )
            gold_args = []
            if action.kind is not ActionKind.SYS:
                sig = schema.signature(action.name)
                arg_types = {a.name: a.arg_type for a in sig.arguments}
                for arg_name, binding in action.args:
                    if arg_name not in arg_types:
                        raise AnnotationGapError(
                            f"{dialogue.dialogue_id}: action {action.name} binds unknown arg {arg_name}"
                        )
                    gold_args.append((arg_name, arg_types[arg_name], binding_key(binding)))
            step_examples.append(
                StepExample(
                    state=state,
                    gold_kind=action.kind,
                    gold_name=action.name,
                    gold_args=tuple(gold_args),
                )
            )
            past_actions.append(action.name)
            if action.result_ref:
                sig = schema.signature(action.name)
                raw_results.append((action.result_ref, sig.produces, action.name, ti))
        past_utts.append(cur_tokens)
        all_mentions.extend(cur_mentions)
    return utt_examples, step_examples


# ---------------------------------------------------------------------------
# parameter construction


def build_vocabulary(corpus: list[Dialogue], schema: DomainSchema) -> Vocabulary:
    tokens: dict[str, int] = {"<oov>": OOV}
    for d in corpus:
        for turn in d.turns:
            for tok in turn.seeker_utterance.tokens:
                if tok not in tokens:
                    tokens[tok] = len(tokens)
    value_types = {t: i for i, t in enumerate(sorted(schema.entity_types) + sorted(schema.result_types()))}
    actions = {name: i for i, (_kind, name) in enumerate(schema.action_inventory())}
    arg_names = sorted({a.name for s in schema.signatures for a in s.arguments})
    tags = crf.bio_tags(sorted(schema.entity_types))
    return Vocabulary(
        tokens=tokens,
        value_types=value_types,
        actions=actions,
        arg_names={n: i for i, n in enumerate(arg_names)},
        tags=tags,
    )


def cf_width(schema: DomainSchema, config: EncoderConfig) -> int:
    return config.catalog_n_max * len(schema.entity_types)


def init_params(vocab: Vocabulary, schema: DomainSchema, config: EncoderConfig, seed: int) -> Params:
    rng = np.random.default_rng(seed)
    d = config.d
    h = d // 2
    k = len(vocab.tags)
    p: Params = {}
    p["emb.tok"] = 0.1 * rng.standard_normal((len(vocab.tokens), d))
    p["emb.etype"] = 0.1 * rng.standard_normal((len(vocab.value_types), d))
    p["emb.act"] = 0.1 * rng.standard_normal((len(vocab.actions), d))
    p["emb.argname"] = 0.1 * rng.standard_normal((len(vocab.arg_names), d))
    p["emb.prov"] = 0.1 * rng.standard_normal((len(PROVENANCE), d))
    p["emb.age"] = 0.1 * rng.standard_normal((AGE_BUCKETS, d))
    init_gru(p, rng, "enc.fw", d, h)
    init_gru(p, rng, "enc.bw", d, h)
    f = cf_width(schema, config)
    init_gru(p, rng, "ner.fw", d + f, h)
    init_gru(p, rng, "ner.bw", d + f, h)
    p["ner.W"] = glorot(rng, k, d)
    p["ner.b"] = np.zeros(k)
    p["ner.trans"] = np.zeros((k, k))
    p["ner.start"] = np.zeros(k)
    p["ner.end"] = np.zeros(k)
    n_actions = len(vocab.actions)
    p["ap.Wh"] = glorot(rng, 5 * d, 5 * d)
    # positive bias keeps hidden ReLU units alive at init (and keeps
    # pre-activations away from the kink where finite differences are invalid)
    p["ap.bh"] = np.full(5 * d, 0.5)
    p["ap.W"] = glorot(rng, n_actions, 5 * d)
    p["ap.b"] = np.zeros(n_actions)
    p["af.W1"] = glorot(rng, d, 5 * d)
    p["af.W2"] = glorot(rng, d, 4 * d)
    p["af.b"] = np.zeros(d)
    p["af.v"] = 0.1 * rng.standard_normal(d)
    return p


# ---------------------------------------------------------------------------
# NER


def ner_feature_matrix(tokens, schema: DomainSchema, config: EncoderConfig, enabled: bool) -> np.ndarray:
    f = cf_width(schema, config)
    if not enabled or not len(tokens):
        return np.zeros((len(tokens), f))
    catalogs = [schema.catalog(t) for t in sorted(schema.entity_types)]
    mat = catalog_features(list(tokens), catalogs, config.catalog_n_max, anchor=config.catalog_anchor)
    return mat.reshape(len(tokens), f)


def ner_emissions(params: Params, vocab: Vocabulary, tokens, cf: np.ndarray):
    ids = vocab.token_ids(tokens)
    x = np.concatenate([params["emb.tok"][ids], cf], axis=1)
    states, cache = bigru_forward(params, "ner", x)
    emissions = states @ params["ner.W"].T + params["ner.b"]
    return emissions, states, cache, ids


def ner_crf_scores(params: Params, vocab: Vocabulary, emissions: np.ndarray) -> crf.CrfScores:
    start_mask, trans_mask = crf.bio_masks(vocab.tags)
    return crf.CrfScores(
        emissions=emissions,
        transitions=np.where(trans_mask, params["ner.trans"], crf.NEG_INF),
        start=np.where(start_mask, params["ner.start"], crf.NEG_INF),
        end=params["ner.end"],
    )


def ner_decode(tokens, cf: np.ndarray, params: Params, vocab: Vocabulary) -> list[EntityMention]:
    """Viterbi-maximal BIO sequence converted to typed spans."""
    if not len(tokens):
        return []
    emissions, _states, _cache, _ids = ner_emissions(params, vocab, tokens, cf)
    scores = ner_crf_scores(params, vocab, emissions)
    path, _ = crf.viterbi(scores)
    spans = crf.tags_to_spans(path, vocab.tags)
    return [
        EntityMention(start=s, end=e, entity_type=t, value=" ".join(tokens[s:e]))
        for s, e, t in spans
    ]


def ner_loss_and_grad(
    batch: list[tuple[tuple[str, ...], list[int], np.ndarray]],
    params: Params,
    vocab: Vocabulary,
    grads: Optional[Grads],
) -> float:
    """Sum of CRF NLLs over (tokens, gold tag ids, catalog features) items;
    accumulates gradients for emissions network, embeddings and transitions."""
    start_mask, trans_mask = crf.bio_masks(vocab.tags)
    total = 0.0
    for tokens, gold, cf in batch:
        if len(gold) != len(tokens):
            raise MalformedTagsError("tag/token length mismatch")
        _check_bio(gold, vocab.tags)
        emissions, states, cache, ids = ner_emissions(params, vocab, tokens, cf)
        scores = ner_crf_scores(params, vocab, emissions)
        nll, d_em, d_trans, d_start, d_end = crf.nll_and_grads(scores, gold)
        total += nll
        if grads is None:
            continue
        accumulate(grads, "ner.trans", np.where(trans_mask, d_trans, 0.0))
        accumulate(grads, "ner.start", np.where(start_mask, d_start, 0.0))
        accumulate(grads, "ner.end", d_end)
        accumulate(grads, "ner.W", d_em.T @ states)
        accumulate(grads, "ner.b", d_em.sum(axis=0))
        d_states = d_em @ params["ner.W"]
        dx = bigru_backward(params, "ner", cache, d_states, grads)
        d_tok = dx[:, : params["emb.tok"].shape[1]]
        if "emb.tok" not in grads:
            grads["emb.tok"] = np.zeros_like(params["emb.tok"])
        np.add.at(grads["emb.tok"], ids, d_tok)
    return total


def _check_bio(gold: list[int], tags: list[str]) -> None:
    prev = "O"
    for tid in gold:
        if not 0 <= tid < len(tags):
            raise MalformedTagsError(f"tag id {tid} out of range")
        tag = tags[tid]
        if tag.startswith("I-"):
            body = tag[2:]
            if prev not in (f"B-{body}", f"I-{body}"):
                raise MalformedTagsError(f"I-{body} without adjacent B-{body}/I-{body}")
        prev = tag
    return


# ---------------------------------------------------------------------------
# AP


def ap_logits(params: Params, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Feed-forward network with ReLU hidden layer, linear logits, softmax on top.

    A single relu'd layer feeding softmax directly dies when every
    pre-activation goes negative (zero gradient for all classes), so the
    hidden layer carries the ReLU and the logit layer stays linear.
    """
    h_pre = params["ap.Wh"] @ c + params["ap.bh"]
    h = np.maximum(h_pre, 0.0)
    return params["ap.W"] @ h + params["ap.b"], h_pre


def ap_predict(
    ce: ContextEmbedding,
    params: Params,
    vocab: Vocabulary,
    kinds: dict[str, ActionKind],
    n_best: int = 4,
    prob_floor: float = 0.01,
) -> list[tuple[ActionKind, str, float]]:
    """Ranked (kind, name, probability); probabilities are the full softmax
    over the action inventory, ties broken by action name."""
    if n_best < 1:
        raise ValueError("n_best must be >= 1")
    logits, _ = ap_logits(params, ce.c)
    probs = softmax(logits)
    names = sorted(vocab.actions, key=lambda n: vocab.actions[n])
    order = sorted(range(len(names)), key=lambda i: (-probs[i], names[i]))
    out = []
    for rank, i in enumerate(order[:n_best]):
        if rank > 0 and probs[i] < prob_floor:
            break
        out.append((kinds[names[i]], names[i], float(probs[i])))
    return out


def ap_loss_and_grad(
    params: Params,
    c: np.ndarray,
    gold_idx: int,
    grads: Optional[Grads],
) -> tuple[float, Optional[np.ndarray]]:
    logits, h_pre = ap_logits(params, c)
    z = logits - logits.max()
    lse = float(np.log(np.exp(z).sum()) + logits.max())
    loss = lse - float(logits[gold_idx])
    if grads is None:
        return loss, None
    probs = softmax(logits)
    d_logits = probs
    d_logits[gold_idx] -= 1.0
    h = np.maximum(h_pre, 0.0)
    accumulate(grads, "ap.W", np.outer(d_logits, h))
    accumulate(grads, "ap.b", d_logits)
    d_h = params["ap.W"].T @ d_logits
    d_h_pre = d_h * (h_pre > 0)
    accumulate(grads, "ap.Wh", np.outer(d_h_pre, c))
    accumulate(grads, "ap.bh", d_h_pre)
    return loss, params["ap.Wh"].T @ d_h_pre


# ---------------------------------------------------------------------------
# AF


def candidate_repr(params: Params, vocab: Vocabulary, cand) -> tuple[np.ndarray, dict]:
    """Pooled value embedding + type + provenance + age embeddings.

    The pooled stand-in for per-token context states loses position, so
    provenance (current / past / result) and age restore the recency signal
    argument filling needs.
    """
    trace: dict = {}
    if isinstance(cand, ContextMention):
        rep, ids = mention_repr(params, vocab, cand)
        prov = PROVENANCE["current"] if cand.age == 0 else PROVENANCE["past"]
        trace["tok_ids"] = ids
        trace["etype"] = vocab.value_types[cand.entity_type]
    else:
        rep = params["emb.act"][vocab.actions[cand.producer]] + params["emb.etype"][vocab.value_types[cand.result_type]]
        prov = PROVENANCE["result"]
        trace["act_id"] = vocab.actions[cand.producer]
        trace["etype"] = vocab.value_types[cand.result_type]
    age = min(cand.age, AGE_BUCKETS - 1)
    rep = rep + params["emb.prov"][prov] + params["emb.age"][age]
    trace["prov"] = prov
    trace["age"] = age
    return rep, trace


def candidate_type(cand) -> str:
    return cand.entity_type if isinstance(cand, ContextMention) else cand.result_type


@dataclass
class AfCache:
    c: np.ndarray
    u: np.ndarray  # (n, 4d)
    a: np.ndarray  # (n, h) tanh activations
    scores: np.ndarray
    traces: list[dict]
    arg_ids: tuple[int, int, int]  # argname, argtype, action embedding rows


def af_scores(
    params: Params,
    vocab: Vocabulary,
    c: np.ndarray,
    candidates: list,
    action_name: str,
    arg_name: str,
    arg_type: str,
) -> AfCache:
    d = params["emb.tok"].shape[1]
    an = vocab.arg_names[arg_name]
    at = vocab.value_types[arg_type]
    act = vocab.actions[action_name]
    shared = np.concatenate([params["emb.argname"][an], params["emb.etype"][at], params["emb.act"][act]])
    q = params["af.W1"] @ c + params["af.b"]
    u = np.zeros((len(candidates), 4 * d))
    traces = []
    for i, cand in enumerate(candidates):
        rep, trace = candidate_repr(params, vocab, cand)
        u[i, :d] = rep
        u[i, d:] = shared
        traces.append(trace)
    a = np.tanh(q[None, :] + u @ params["af.W2"].T) if len(candidates) else np.zeros((0, len(q)))
    scores = a @ params["af.v"]
    return AfCache(c=c, u=u, a=a, scores=scores, traces=traces, arg_ids=(an, at, act))


def af_fill(
    ce: ContextEmbedding,
    candidates: list,
    action_name: str,
    arg_name: str,
    arg_type: str,
    params: Params,
    vocab: Vocabulary,
):
    """Pick the highest-probability type-legal candidate.

    Candidates whose type violates the argument's declared type get probability
    exactly 0; raises NoLegalCandidateError when nothing is legal.
    """
    legal = [candidate_type(cand) == arg_type for cand in candidates]
    if not any(legal):
        raise NoLegalCandidateError(f"no candidate of type {arg_type!r} for {action_name}.{arg_name}")
    cache = af_scores(params, vocab, ce.c, candidates, action_name, arg_name, arg_type)
    probs = sigmoid(cache.scores)
    probs = np.where(legal, probs, 0.0)
    chosen = int(np.argmax(probs))
    return candidates[chosen], probs


def af_loss_and_grad(
    params: Params,
    vocab: Vocabulary,
    c: np.ndarray,
    candidates: list,
    gold_key: tuple,
    action_name: str,
    arg_name: str,
    arg_type: str,
    grads: Optional[Grads],
) -> tuple[float, Optional[np.ndarray]]:
    """Binary cross-entropy over all candidates (gold one-hot)."""
    cache = af_scores(params, vocab, c, candidates, action_name, arg_name, arg_type)
    y = np.array([1.0 if cand.key == gold_key else 0.0 for cand in candidates])
    if y.sum() == 0:
        raise AnnotationGapError(f"gold candidate {gold_key} missing from context for {action_name}.{arg_name}")
    s = cache.scores
    loss = float(np.sum(np.maximum(s, 0.0) - s * y + np.log1p(np.exp(-np.abs(s)))))
    if grads is None:
        return loss, None

    d = params["emb.tok"].shape[1]
    ds = sigmoid(s) - y  # (n,)
    accumulate(grads, "af.v", cache.a.T @ ds)
    d_pre = (ds[:, None] * params["af.v"][None, :]) * (1.0 - cache.a * cache.a)  # (n, h)
    d_q = d_pre.sum(axis=0)
    accumulate(grads, "af.W1", np.outer(d_q, c))
    accumulate(grads, "af.b", d_q)
    accumulate(grads, "af.W2", d_pre.T @ cache.u)
    d_u = d_pre @ params["af.W2"]  # (n, 4d)

    an, at, act = cache.arg_ids
    _scatter(grads, params, "emb.argname", an, d_u[:, d : 2 * d].sum(axis=0))
    _scatter(grads, params, "emb.etype", at, d_u[:, 2 * d : 3 * d].sum(axis=0))
    _scatter(grads, params, "emb.act", act, d_u[:, 3 * d :].sum(axis=0))
    for i, trace in enumerate(cache.traces):
        d_rep = d_u[i, :d]
        _scatter(grads, params, "emb.prov", trace["prov"], d_rep)
        _scatter(grads, params, "emb.age", trace["age"], d_rep)
        _scatter(grads, params, "emb.etype", trace["etype"], d_rep)
        if "tok_ids" in trace:
            ids = trace["tok_ids"]
            if len(ids):
                if "emb.tok" not in grads:
                    grads["emb.tok"] = np.zeros_like(params["emb.tok"])
                np.add.at(grads["emb.tok"], ids, np.tile(d_rep / len(ids), (len(ids), 1)))
        else:
            _scatter(grads, params, "emb.act", trace["act_id"], d_rep)
    return loss, params["af.W1"].T @ d_q


def _scatter(grads: Grads, params: Params, name: str, row: int, val: np.ndarray) -> None:
    if name not in grads:
        grads[name] = np.zeros_like(params[name])
    grads[name][row] += val


# ---------------------------------------------------------------------------
# bundle


@dataclass
class ModelBundle:
    params: Params
    vocab: Vocabulary
    config: TrainConfig
    schema_fingerprint: str
    action_kinds: dict[str, ActionKind]
    version: int = BUNDLE_VERSION
    loss_curve: list[float] = field(default_factory=list)

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(d=self.config.d)

    def check_schema(self, schema: DomainSchema) -> None:
        if schema.fingerprint() != self.schema_fingerprint:
            raise SchemaMismatchError(
                f"bundle was trained for schema {self.schema_fingerprint}, got {schema.fingerprint()}"
            )

    # --- predictor protocol (shared with evaluation stubs) ---

    def encode(self, state: DialogState, schema: DomainSchema) -> tuple[ContextEmbedding, EncodeCache]:
        return encode_context(state, self.params, self.vocab, self.encoder_config())

    def predict_entities(self, tokens, schema: DomainSchema) -> list[EntityMention]:
        cf = ner_feature_matrix(tokens, schema, self.encoder_config(), self.config.catalog_features)
        return ner_decode(tokens, cf, self.params, self.vocab)

    def predict_actions(self, ce: ContextEmbedding, n_best: Optional[int] = None):
        return ap_predict(
            ce, self.params, self.vocab, self.action_kinds,
            n_best=n_best or self.config.n_best, prob_floor=self.config.prob_floor,
        )

    def fill_argument(self, ce: ContextEmbedding, state: DialogState, action_name: str,
                      arg_name: str, arg_type: str):
        return af_fill(ce, state.candidates(), action_name, arg_name, arg_type, self.params, self.vocab)

    # --- serialization ---

    def save(self, path: str | Path) -> None:
        payload = {
            "version": self.version,
            "schema_fingerprint": self.schema_fingerprint,
            "config": self.config.to_json(),
            "vocab": self.vocab.to_json(),
            "action_kinds": {n: k.value for n, k in self.action_kinds.items()},
            "loss_curve": self.loss_curve,
            "params": {
                name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
                for name, arr in sorted(self.params.items())
            },
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ModelBundle":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if "version" not in payload:
            raise ValueError("bundle file missing version field")
        params = {
            name: np.array(entry["data"], dtype=float).reshape(entry["shape"])
            for name, entry in payload["params"].items()
        }
        return cls(
            params=params,
            vocab=Vocabulary.from_json(payload["vocab"]),
            config=TrainConfig.from_json(payload["config"]),
            schema_fingerprint=payload["schema_fingerprint"],
            action_kinds={n: ActionKind(k) for n, k in payload["action_kinds"].items()},
            version=payload["version"],
            loss_curve=list(payload.get("loss_curve", [])),
        )


# ---------------------------------------------------------------------------
# training


@dataclass
class CompiledDialogue:
    ner_items: list[tuple[tuple[str, ...], list[int], np.ndarray]]
    steps: list[StepExample]


def compile_dialogue(
    dialogue: Dialogue,
    schema: DomainSchema,
    vocab: Vocabulary,
    enc_config: EncoderConfig,
    use_cf: bool,
) -> CompiledDialogue:
    utt_examples, step_examples = extract_steps(dialogue, schema, enc_config)
    ner_items = []
    for ue in utt_examples:
        gold = crf.spans_to_tags(list(ue.gold_spans), len(ue.tokens), vocab.tags)
        cf = ner_feature_matrix(ue.tokens, schema, enc_config, use_cf)
        if len(ue.tokens):
            ner_items.append((ue.tokens, gold, cf))
    return CompiledDialogue(ner_items=ner_items, steps=step_examples)


def batch_loss(
    compiled: list[CompiledDialogue],
    params: Params,
    vocab: Vocabulary,
    enc_config: EncoderConfig,
    grads: Optional[Grads],
) -> tuple[float, int]:
    """Joint loss (sum) over a batch of compiled dialogues; term count for
    normalization.  grads=None computes the loss only (finite-difference path)."""
    total = 0.0
    n_terms = 0
    for cd in compiled:
        total += ner_loss_and_grad(cd.ner_items, params, vocab, grads)
        n_terms += len(cd.ner_items)
        for step in cd.steps:
            ce, cache = encode_context(step.state, params, vocab, enc_config)
            d_c = np.zeros_like(ce.c)
            gold_idx = vocab.actions[step.gold_name]
            loss, d_c_ap = ap_loss_and_grad(params, ce.c, gold_idx, grads)
            total += loss
            n_terms += 1
            if d_c_ap is not None:
                d_c += d_c_ap
            candidates = step.state.candidates()
            for arg_name, arg_type, gold_key in step.gold_args:
                loss, d_c_af = af_loss_and_grad(
                    params, vocab, ce.c, candidates, gold_key,
                    step.gold_name, arg_name, arg_type, grads,
                )
                total += loss
                n_terms += 1
                if d_c_af is not None:
                    d_c += d_c_af
            if grads is not None:
                encode_backward(d_c, cache, params, vocab, enc_config, grads)
    return total, n_terms


def train(
    corpus: list[Dialogue],
    schema: DomainSchema,
    config: TrainConfig,
) -> ModelBundle:
    """Joint training of the shared encoder and the three heads; deterministic
    given config.seed.  Returns a bundle with the per-epoch loss curve."""
    if not corpus:
        raise ValueError("empty training corpus")
    enc_config = EncoderConfig(d=config.d)
    vocab = build_vocabulary(corpus, schema)
    params = init_params(vocab, schema, enc_config, config.seed)
    compiled = [compile_dialogue(d, schema, vocab, enc_config, config.catalog_features) for d in corpus]

    kinds = {name: kind for kind, name in schema.action_inventory()}
    bundle = ModelBundle(
        params=params,
        vocab=vocab,
        config=config,
        schema_fingerprint=schema.fingerprint(),
        action_kinds=kinds,
    )
    rng = np.random.default_rng(config.seed)
    adam = Adam(lr=config.lr)
    for _epoch in range(config.epochs):
        order = rng.permutation(len(compiled))
        epoch_loss = 0.0
        epoch_terms = 0
        for lo in range(0, len(order), config.batch_size):
            batch = [compiled[i] for i in order[lo : lo + config.batch_size]]
            grads: Grads = {}
            loss, n_terms = batch_loss(batch, params, vocab, enc_config, grads)
            if n_terms == 0:
                continue
            for g in grads.values():
                g /= n_terms
            adam.step(params, grads)
            epoch_loss += loss
            epoch_terms += n_terms
        bundle.loss_curve.append(epoch_loss / max(epoch_terms, 1))
    return bundle
