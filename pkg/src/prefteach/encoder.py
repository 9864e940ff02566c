"""Dialogue context encoding: the unified embedding C built from five
mean-pooled blocks [current utterance, past utterances, current entities,
past entities, past actions], plus per-token n-gram catalog features.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .nn import BiGruCache, Params, bigru_backward, bigru_forward
from .types import Catalog, normalize_value

OOV = 0  # reserved vocabulary slot
PROVENANCE = {"current": 0, "past": 1, "result": 2}
AGE_BUCKETS = 4  # 0, 1, 2, 3+
BLOCKS = ("cu", "pu", "ce", "pe", "pa")


class DimensionMismatchError(ValueError):
    pass


def catalog_features(
    tokens: list[str],
    catalogs: list[Catalog],
    n_max: int,
    anchor: str = "first-token",
) -> np.ndarray:
    """Binary indicators (tokens x n_max x len(catalogs)).

    Plane n marks where an n-gram of the utterance exactly equals (after
    normalization) a value of catalog e.  anchor="first-token" marks only the
    n-gram's first token; anchor="per-token" marks every covered token.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if anchor not in ("first-token", "per-token"):
        raise ValueError(f"unknown anchor mode {anchor!r}")
    t_len = len(tokens)
    out = np.zeros((t_len, n_max, len(catalogs)))
    lowered = [t.lower() for t in tokens]
    norm_values = [c.normalized() for c in catalogs]
    for n in range(1, n_max + 1):
        for start in range(0, t_len - n + 1):
            gram = normalize_value(" ".join(lowered[start : start + n]))
            for e, values in enumerate(norm_values):
                if gram in values:
                    if anchor == "first-token":
                        out[start, n - 1, e] = 1.0
                    else:
                        out[start : start + n, n - 1, e] = 1.0
    return out


@dataclass(frozen=True)
class ContextMention:
    """An entity occurrence visible in the dialogue context."""

    entity_type: str
    value: str
    turn_index: int
    span: tuple[int, int]
    age: int  # turns since it was uttered; 0 = current utterance

    @property
    def key(self) -> tuple:
        return ("mention", self.turn_index, self.span)


@dataclass(frozen=True)
class ContextResult:
    """An API result handle available in the context store."""

    handle: str
    result_type: str
    producer: str  # producing action name
    age: int

    @property
    def key(self) -> tuple:
        return ("result", self.handle)


@dataclass(frozen=True)
class DialogState:
    """Teacher-forced snapshot of everything the models may condition on."""

    cur_tokens: tuple[str, ...]
    cur_mentions: tuple[ContextMention, ...]
    past_utterances: tuple[tuple[str, ...], ...]  # windowed, oldest first
    past_mentions: tuple[ContextMention, ...]
    past_actions: tuple[str, ...]  # windowed action names, oldest last
    results: tuple[ContextResult, ...]

    def candidates(self) -> list:
        """Argument-filling candidates: current mentions (span order), then
        past mentions and results, most recent first."""
        cur = sorted(self.cur_mentions, key=lambda m: m.span)
        past = sorted(self.past_mentions, key=lambda m: (m.age, m.span))
        res = sorted(self.results, key=lambda r: r.age)
        return list(cur) + list(past) + list(res)


@dataclass
class EncoderConfig:
    d: int = 32
    past_utterance_window: int = 3
    # two actions pin down the within-turn phase exactly (fire/notify/handoff);
    # wider windows blur the pooled mean and cost action-prediction accuracy
    past_action_window: int = 2
    catalog_n_max: int = 4
    catalog_anchor: str = "per-token"

    def __post_init__(self):
        if self.d < 8 or self.d % 2 != 0:
            raise ValueError("embedding width d must be an even integer >= 8")


@dataclass
class Vocabulary:
    """Token/type/action/argument inventories backing the embedding tables."""

    tokens: dict[str, int]  # includes "<oov>" -> 0
    value_types: dict[str, int]  # entity types + result types
    actions: dict[str, int]  # action names incl. SYS
    arg_names: dict[str, int]
    tags: list[str]

    def token_ids(self, tokens) -> np.ndarray:
        return np.array([self.tokens.get(t, OOV) for t in tokens], dtype=int)

    def to_json(self) -> dict:
        return {
            "tokens": self.tokens,
            "value_types": self.value_types,
            "actions": self.actions,
            "arg_names": self.arg_names,
            "tags": self.tags,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Vocabulary":
        return cls(
            tokens=dict(d["tokens"]),
            value_types=dict(d["value_types"]),
            actions=dict(d["actions"]),
            arg_names=dict(d["arg_names"]),
            tags=list(d["tags"]),
        )


@dataclass
class ContextEmbedding:
    c: np.ndarray  # (5d,)
    token_states: np.ndarray  # (len(cur_tokens), d)

    def block(self, name: str, d: int) -> np.ndarray:
        i = BLOCKS.index(name)
        return self.c[i * d : (i + 1) * d]


@dataclass
class EncodeCache:
    state: DialogState
    cur_ids: np.ndarray
    bigru: Optional[BiGruCache]
    past_utt_ids: list[np.ndarray]
    mention_ids: dict[tuple, np.ndarray] = field(default_factory=dict)


def mention_repr(params: Params, vocab: Vocabulary, mention: ContextMention) -> tuple[np.ndarray, np.ndarray]:
    """Pooled value-token embedding + type embedding; returns (repr, token ids)."""
    ids = vocab.token_ids(mention.value.split())
    pooled = params["emb.tok"][ids].mean(axis=0) if len(ids) else np.zeros(params["emb.tok"].shape[1])
    rep = pooled + params["emb.etype"][vocab.value_types[mention.entity_type]]
    return rep, ids


def encode_context(
    state: DialogState,
    params: Params,
    vocab: Vocabulary,
    config: EncoderConfig,
) -> tuple[ContextEmbedding, EncodeCache]:
    """Unified context embedding C = [E_cu, E_pu, E_ce, E_pe, E_pa].

    Each block is the mean-pooled embedding of its items (zero when empty).
    The current utterance runs through the shared bidirectional recurrent
    encoder; its pooled states form E_cu and its per-token states are exposed.
    """
    d = config.d
    if params["emb.tok"].shape[1] != d:
        raise DimensionMismatchError(
            f"params built for d={params['emb.tok'].shape[1]}, config wants d={d}"
        )
    cache = EncodeCache(state=state, cur_ids=vocab.token_ids(state.cur_tokens), bigru=None, past_utt_ids=[])

    if len(cache.cur_ids):
        x = params["emb.tok"][cache.cur_ids]
        token_states, cache.bigru = bigru_forward(params, "enc", x)
        e_cu = token_states.mean(axis=0)
    else:
        token_states = np.zeros((0, d))
        e_cu = np.zeros(d)

    pu_vecs = []
    for utt in state.past_utterances[-config.past_utterance_window :]:
        ids = vocab.token_ids(utt)
        cache.past_utt_ids.append(ids)
        if len(ids):
            pu_vecs.append(params["emb.tok"][ids].mean(axis=0))
    e_pu = np.mean(pu_vecs, axis=0) if pu_vecs else np.zeros(d)

    def pool_mentions(mentions) -> np.ndarray:
        if not mentions:
            return np.zeros(d)
        reps = []
        for m in mentions:
            rep, ids = mention_repr(params, vocab, m)
            cache.mention_ids[m.key] = ids
            reps.append(rep)
        return np.mean(reps, axis=0)

    e_ce = pool_mentions(state.cur_mentions)
    e_pe = pool_mentions(state.past_mentions)

    pa = state.past_actions[-config.past_action_window :]
    if pa:
        ids = np.array([vocab.actions[a] for a in pa], dtype=int)
        e_pa = params["emb.act"][ids].mean(axis=0)
    else:
        e_pa = np.zeros(d)

    c = np.concatenate([e_cu, e_pu, e_ce, e_pe, e_pa])
    if not np.all(np.isfinite(c)):
        raise DimensionMismatchError("context embedding contains non-finite values")
    return ContextEmbedding(c=c, token_states=token_states), cache


def encode_backward(
    d_c: np.ndarray,
    cache: EncodeCache,
    params: Params,
    vocab: Vocabulary,
    config: EncoderConfig,
    grads: dict,
) -> None:
    """Backprop d_loss/d_C into the embedding tables and the shared encoder."""
    d = config.d
    d_cu, d_pu, d_ce, d_pe, d_pa = (d_c[i * d : (i + 1) * d] for i in range(5))
    state = cache.state

    if len(cache.cur_ids):
        t_len = len(cache.cur_ids)
        d_states = np.tile(d_cu / t_len, (t_len, 1))
        dx = bigru_backward(params, "enc", cache.bigru, d_states, grads)
        _scatter_rows(grads, "emb.tok", params, cache.cur_ids, dx)

    pu_ids = [ids for ids in cache.past_utt_ids if len(ids)]
    if pu_ids:
        per_utt = d_pu / len(pu_ids)
        for ids in pu_ids:
            _scatter_rows(grads, "emb.tok", params, ids, np.tile(per_utt / len(ids), (len(ids), 1)))

    for block_grad, mentions in ((d_ce, state.cur_mentions), (d_pe, state.past_mentions)):
        if not mentions:
            continue
        per = block_grad / len(mentions)
        for m in mentions:
            ids = cache.mention_ids[m.key]
            if len(ids):
                _scatter_rows(grads, "emb.tok", params, ids, np.tile(per / len(ids), (len(ids), 1)))
            _scatter_rows(
                grads, "emb.etype", params,
                np.array([vocab.value_types[m.entity_type]]), per[None, :],
            )

    pa = state.past_actions[-config.past_action_window :]
    if pa:
        ids = np.array([vocab.actions[a] for a in pa], dtype=int)
        _scatter_rows(grads, "emb.act", params, ids, np.tile(d_pa / len(ids), (len(ids), 1)))


def _scatter_rows(grads: dict, name: str, params: Params, ids: np.ndarray, rows: np.ndarray) -> None:
    if name not in grads:
        grads[name] = np.zeros_like(params[name])
    np.add.at(grads[name], ids, rows)
