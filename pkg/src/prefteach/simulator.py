"""Dialogue simulation: goal sampling over an entity transfer graph plus a
seeker-provider interaction loop that emits fully annotated dialogues.

The provider side is deterministic given the seeker's behavior, so every
generated annotation is a learnable target; diversity comes from goal
sampling, entity resampling, template paraphrases, continuation markers and
injected unhappy paths.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .types import (
    ActionKind,
    ActionRecord,
    ActionSignature,
    ArgumentBinding,
    BindingSource,
    Catalog,
    Dialogue,
    DomainSchema,
    EntityMention,
    EntityTransferGraph,
    GoalVertex,
    NlgTemplate,
    Speaker,
    SYS_END,
    SYS_WAIT,
    Turn,
    Utterance,
    join_tokens,
    normalize_value,
    tokenize,
)

STOP = "<stop>"
MAX_GOAL_LEN = 5


class EmptySeedError(ValueError):
    pass


class UnknownApiError(ValueError):
    pass


class NoCatalogValueError(ValueError):
    pass


class GoalSamplingError(ValueError):
    pass


class MissingTemplateError(KeyError):
    pass


class UnfilledSlotError(ValueError):
    pass


class InsufficientTemplatesError(ValueError):
    pass


def api_result_arg(api_name: str) -> str:
    """Argument name a notify NLG uses for an API's result, section-3.3 style."""
    base = api_name[: -len("Action")] if api_name.endswith("Action") else api_name
    return base + "Result"


def notify_act(api_name: str, outcome: str = "success") -> str:
    return f"notify_{api_name}_{outcome}"


def request_act(entity_type: str) -> str:
    return f"request_{entity_type}"


def confirm_act(api_name: str) -> str:
    return f"confirm_{api_name}"


PROMPT_SETUP = "prompt_setup_preference"
CLARIFY_GENERIC = "clarify_generic"
ASK_UPDATE = "ask_update"
CLOSING = "closing"
CONFIRM = "confirm"
CONFIRM_TYPE = "confirmation"


@dataclass(frozen=True)
class VariationConfig:
    entity_resample_prob: float = 0.8
    paraphrase_prob: float = 0.8
    error_injection_rate: float = 0.1
    # weights over transition evidence: (seed-observed counts, shared-entity
    # affinity, input-output relation)
    mixing_ratio: tuple[float, float, float] = (0.7, 0.15, 0.15)
    transfer_prob: float = 0.3

    def __post_init__(self):
        for p in (self.entity_resample_prob, self.paraphrase_prob, self.error_injection_rate, self.transfer_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must be in [0, 1]")
        if any(w < 0 for w in self.mixing_ratio) or abs(sum(self.mixing_ratio) - 1.0) > 1e-9:
            raise ValueError("mixing_ratio weights must be >= 0 and sum to 1")


@dataclass(frozen=True)
class TransitionMatrix:
    apis: tuple[str, ...]
    start: np.ndarray  # (|apis|,)
    rows: np.ndarray  # (|apis|, |apis| + 1), last column = STOP

    def __post_init__(self):
        if np.any(self.start < 0) or np.any(self.rows < 0):
            raise ValueError("negative transition probability")
        if abs(self.start.sum() - 1.0) > 1e-9:
            raise ValueError("start distribution does not sum to 1")
        sums = self.rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("transition row does not sum to 1")

    def api_index(self, name: str) -> int:
        return self.apis.index(name)

    def row(self, name: str) -> dict[str, float]:
        r = self.rows[self.api_index(name)]
        out = {a: float(r[i]) for i, a in enumerate(self.apis)}
        out[STOP] = float(r[-1])
        return out

    def start_dist(self) -> dict[str, float]:
        return {a: float(self.start[i]) for i, a in enumerate(self.apis)}


def _entity_arg_types(sig: ActionSignature, schema: DomainSchema) -> set[str]:
    etypes = set(schema.entity_types)
    return {a.arg_type for a in sig.arguments if a.arg_type in etypes}


def _normalize_or_uniform(weights: np.ndarray) -> np.ndarray:
    total = weights.sum()
    if total <= 0:
        return np.full(weights.shape, 1.0 / weights.size)
    return weights / total


def estimate_transitions(
    seeds: list[Dialogue],
    mixing: tuple[float, float, float],
    schema: DomainSchema,
) -> TransitionMatrix:
    """First-order API chain over the APIs observed in the seed dialogues.

    Count evidence gets add-one smoothing; shared-entity affinity (Jaccard over
    argument entity types) and the input-output indicator (producer result type
    consumed by the successor) are normalized per row and mixed in.  Rows of
    APIs flagged terminal in the schema are forced to STOP so sampled goals
    never continue past them.
    """
    if not seeds:
        raise EmptySeedError("no seed dialogues")
    known = {s.name for s in schema.api_signatures()}
    sequences: list[list[str]] = []
    for d in seeds:
        seq = [a.name for a in d.actions if a.kind is ActionKind.API]
        for name in seq:
            if name not in known:
                raise UnknownApiError(f"seed dialogue {d.dialogue_id} uses unknown API {name!r}")
        if seq:
            sequences.append(seq)
    if not sequences:
        raise EmptySeedError("seed dialogues contain no API calls")

    apis = tuple(sorted({a for seq in sequences for a in seq}))
    n = len(apis)
    idx = {a: i for i, a in enumerate(apis)}

    start_counts = np.zeros(n)
    trans_counts = np.zeros((n, n + 1))  # last col = STOP
    for seq in sequences:
        start_counts[idx[seq[0]]] += 1
        for a, b in zip(seq, seq[1:]):
            trans_counts[idx[a], idx[b]] += 1
        trans_counts[idx[seq[-1]], n] += 1

    start = (start_counts + 1.0) / (len(sequences) + n)

    m0, m1, m2 = mixing
    rows = np.zeros((n, n + 1))
    sigs = {s.name: s for s in schema.api_signatures()}
    for i, a in enumerate(apis):
        visits = trans_counts[i].sum()
        count_row = (trans_counts[i] + 1.0) / (visits + n + 1)

        a_types = _entity_arg_types(sigs[a], schema)
        aff = np.zeros(n + 1)
        io = np.zeros(n + 1)
        for j, b in enumerate(apis):
            b_types = _entity_arg_types(sigs[b], schema)
            union = a_types | b_types
            if union:
                aff[j] = len(a_types & b_types) / len(union)
            produced = sigs[a].produces
            if produced and any(arg.arg_type == produced for arg in sigs[b].arguments):
                io[j] = 1.0
        rows[i] = m0 * count_row + m1 * _normalize_or_uniform(aff) + m2 * _normalize_or_uniform(io)

    for i, a in enumerate(apis):
        if sigs[a].terminal:
            rows[i] = 0.0
            rows[i, n] = 1.0

    return TransitionMatrix(apis=apis, start=start, rows=rows)


def seed_entity_values(schema: DomainSchema) -> dict[str, list[str]]:
    """Entity values observed in seed dialogues, per type (sorted, deduped)."""
    seen: dict[str, set[str]] = {}
    for d in schema.seed_dialogues:
        for t in d.turns:
            for m in t.seeker_entities:
                seen.setdefault(m.entity_type, set()).add(m.value)
    return {k: sorted(v) for k, v in seen.items()}


def sample_goal(
    tm: TransitionMatrix,
    schema: DomainSchema,
    rng: np.random.Generator,
    transfer_prob: float = 0.3,
    entity_resample_prob: float = 1.0,
    seed_values: Optional[dict[str, list[str]]] = None,
    max_len: int = MAX_GOAL_LEN,
) -> EntityTransferGraph:
    """Draw an API sequence from the first-order chain, then bind arguments.

    Each required argument either reuses a type-compatible existing vertex
    (probability transfer_prob; confirmations always get a fresh vertex) or
    adds a fresh SeekerEntity with a value drawn from the sampling catalog.
    Result-typed arguments attach to the most recent producing API vertex.
    """
    n = len(tm.apis)
    seq = [tm.apis[int(rng.choice(n, p=tm.start))]]
    while len(seq) < max_len:
        r = tm.rows[tm.api_index(seq[-1])]
        nxt = int(rng.choice(n + 1, p=r))
        if nxt == n:
            break
        seq.append(tm.apis[nxt])

    vertices: list[GoalVertex] = []
    edges: list[tuple[int, int, str]] = []
    pool: dict[str, list[int]] = {}
    producers: dict[str, list[int]] = {}
    etypes = set(schema.entity_types)

    for api in seq:
        sig = schema.signature(api)
        incoming: list[tuple[int, str]] = []
        for arg in sig.required_args():
            if arg.arg_type in etypes:
                compat = pool.get(arg.arg_type, [])
                reuse = (
                    compat
                    and arg.arg_type != CONFIRM_TYPE
                    and rng.random() < transfer_prob
                )
                if reuse:
                    src = compat[int(rng.integers(len(compat)))]
                else:
                    value = _draw_value(arg.arg_type, schema, rng, entity_resample_prob, seed_values)
                    src = len(vertices)
                    vertices.append(GoalVertex(src, "seeker_entity", entity_type=arg.arg_type, value=value))
                    pool.setdefault(arg.arg_type, []).append(src)
            else:
                made = producers.get(arg.arg_type, [])
                if not made:
                    raise GoalSamplingError(
                        f"argument {arg.name!r} of {api} needs result type {arg.arg_type!r} with no prior producer"
                    )
                src = made[-1]
            incoming.append((src, arg.name))
        vid = len(vertices)
        vertices.append(GoalVertex(vid, "api_call", api_name=api))
        for src, arg_name in incoming:
            edges.append((src, vid, arg_name))
        if sig.produces:
            producers.setdefault(sig.produces, []).append(vid)

    return EntityTransferGraph(vertices=tuple(vertices), edges=tuple(edges))


def _draw_value(
    entity_type: str,
    schema: DomainSchema,
    rng: np.random.Generator,
    entity_resample_prob: float,
    seed_values: Optional[dict[str, list[str]]],
) -> str:
    pool = [normalize_value(v) for v in schema.sampling_catalog(entity_type)]
    if not pool:
        raise NoCatalogValueError(f"entity type {entity_type!r} has an empty catalog")
    if seed_values and rng.random() >= entity_resample_prob:
        sticky = [v for v in seed_values.get(entity_type, []) if v in set(pool)]
        if sticky:
            return sticky[int(rng.integers(len(sticky)))]
    return pool[int(rng.integers(len(pool)))]


@dataclass
class SeekerPolicy:
    """Template selection for the seeker: canonical wording unless paraphrasing."""

    paraphrase_prob: float = 0.8

    def choose(self, templates: list[NlgTemplate], rng: np.random.Generator) -> tuple[NlgTemplate, int]:
        if not templates:
            raise MissingTemplateError("no seeker template for act")
        if len(templates) == 1 or rng.random() >= self.paraphrase_prob:
            return templates[0], 0
        i = int(rng.integers(len(templates)))
        return templates[i], i


@dataclass
class ProviderPolicy:
    """Uniform template selection for provider NLG acts."""

    def choose(self, templates: list[NlgTemplate], rng: np.random.Generator) -> tuple[NlgTemplate, int]:
        if not templates:
            raise MissingTemplateError("no provider template for act")
        i = int(rng.integers(len(templates)))
        return templates[i], i


_SLOT_RE = re.compile(r"(\{\w+\})")


def realize_template(
    template: NlgTemplate,
    slot_values: dict[str, str],
    speaker: Speaker,
    marker: Optional[str] = None,
    slot_types: Optional[dict[str, str]] = None,
) -> tuple[Utterance, list[EntityMention]]:
    """Fill a template's slots, tracking the token span of each filled slot.

    Mentions are emitted only for slots whose entity type is given in
    slot_types (surface slots like result summaries produce no mention).
    """
    tokens: list[str] = []
    mentions: list[EntityMention] = []
    if marker:
        tokens.extend(tokenize(marker))
        tokens.append(",")
    for part in _SLOT_RE.split(template.text):
        if part.startswith("{") and part.endswith("}"):
            slot = part[1:-1]
            if slot not in slot_values:
                raise UnfilledSlotError(f"template for {template.act!r} has unfilled slot {slot!r}")
            value_tokens = tokenize(slot_values[slot])
            start = len(tokens)
            tokens.extend(value_tokens)
            if slot_types and slot in slot_types and value_tokens:
                mentions.append(
                    EntityMention(
                        start=start,
                        end=len(tokens),
                        entity_type=slot_types[slot],
                        value=join_tokens(value_tokens),
                    )
                )
        else:
            tokens.extend(tokenize(part))
    utt = Utterance(text=join_tokens(tokens), tokens=tuple(tokens), speaker=speaker)
    return utt, mentions


def realize_nlg(
    act: str,
    bindings: dict[str, str],
    bank: list[NlgTemplate],
    rng: np.random.Generator,
    policy: Optional[ProviderPolicy] = None,
) -> Utterance:
    """Render one dialogue act from a template bank; uniform among matches."""
    templates = [t for t in bank if t.act == act]
    if not templates:
        raise MissingTemplateError(f"no template for act {act!r}")
    policy = policy or ProviderPolicy()
    template, _ = policy.choose(templates, rng)
    utt, _ = realize_template(template, bindings, Speaker.PROVIDER)
    return utt


class _TurnBuilder:
    """Accumulates one dialogue's turns plus the mention bookkeeping."""

    def __init__(self, schema: DomainSchema, seeker: SeekerPolicy, provider: ProviderPolicy, rng: np.random.Generator):
        self.schema = schema
        self.seeker = seeker
        self.provider = provider
        self.rng = rng
        self.turns: list[Turn] = []
        self.template_trace: list[str] = []
        self._result_counts: dict[str, int] = {}
        self._pending_utt: Optional[Utterance] = None
        self._pending_mentions: list[EntityMention] = []
        self._pending_acts: list[str] = []
        self._pending_actions: list[ActionRecord] = []
        self._pending_full_value: Optional[str] = None
        self._pending_partial_value: Optional[str] = None

    def seeker_turn(self, act: str, slot_values: dict[str, str], slot_types: dict[str, str],
                    marker: Optional[str] = None) -> list[EntityMention]:
        assert self._pending_utt is None, "previous turn not flushed"
        templates = self.schema.templates_for(act, bank="seeker")
        template, tidx = self.seeker.choose(templates, self.rng)
        utt, mentions = realize_template(template, slot_values, Speaker.SEEKER, marker=marker, slot_types=slot_types)
        self._pending_utt = utt
        self._pending_mentions = mentions
        self._pending_acts = [act]
        inner = ", ".join(f"{k}={v}" for k, v in sorted(slot_values.items()))
        self._pending_full_value = f"{act}({inner})"
        if len(mentions) == 1:
            m = mentions[0]
            self._pending_partial_value = f"[{utt.text}|{m.entity_type} -> {m.value}]"
        else:
            self._pending_partial_value = None
        self.template_trace.append(f"{act}:{tidx}")
        return mentions

    def turn_index(self) -> int:
        return len(self.turns)

    def mention_binding(self, mention: EntityMention, turn_index: Optional[int] = None) -> ArgumentBinding:
        t = self.turn_index() if turn_index is None else turn_index
        return ArgumentBinding(
            source=BindingSource.SEEKER_ENTITY,
            value=mention.value,
            turn_index=t,
            span=mention.span,
        )

    def new_result(self, sig: ActionSignature) -> str:
        assert sig.produces
        self._result_counts[sig.produces] = self._result_counts.get(sig.produces, 0) + 1
        return f"{sig.produces}{self._result_counts[sig.produces]}"

    def api(self, name: str, args: dict[str, ArgumentBinding]) -> str:
        sig = self.schema.signature(name)
        handle = self.new_result(sig) if sig.produces else None
        self._pending_actions.append(
            ActionRecord(
                kind=ActionKind.API,
                name=name,
                args=tuple(sorted(args.items())),
                result_ref=handle,
            )
        )
        return handle or ""

    def nlg(self, act: str, args: Optional[dict[str, ArgumentBinding]] = None) -> None:
        args = args or {}
        templates = self.schema.templates_for(act, bank="provider")
        template, _ = self.provider.choose(templates, self.rng)
        utt, _ = realize_template(template, {k: b.value for k, b in args.items()}, Speaker.PROVIDER)
        self._pending_actions.append(
            ActionRecord(kind=ActionKind.NLG, name=act, args=tuple(sorted(args.items())), text=utt.text)
        )

    def sys(self, name: str) -> None:
        self._pending_actions.append(ActionRecord(kind=ActionKind.SYS, name=name))
        self.turns.append(
            Turn(
                seeker_utterance=self._pending_utt,  # type: ignore[arg-type]
                seeker_entities=tuple(self._pending_mentions),
                seeker_acts=tuple(self._pending_acts),
                provider_actions=tuple(self._pending_actions),
                partially_normalized_value=self._pending_partial_value,
                fully_normalized_value=self._pending_full_value,
            )
        )
        self._pending_utt = None
        self._pending_mentions = []
        self._pending_acts = []
        self._pending_actions = []
        self._pending_full_value = None
        self._pending_partial_value = None


def run_interaction(
    goal: EntityTransferGraph,
    seeker: SeekerPolicy,
    provider: ProviderPolicy,
    schema: DomainSchema,
    variation: VariationConfig,
    rng: np.random.Generator,
    dialogue_id: str = "dlg",
) -> Dialogue:
    """Play out one goal as a seeker-provider exchange with full annotations.

    The seeker reveals one API per turn (continuation-marked when more follow),
    omits entities at the error-injection rate (forcing a clarification round),
    and answers confirmation prompts before destructive calls.  The provider is
    deterministic: it only fires an API once every required argument is bound.
    """
    b = _TurnBuilder(schema, seeker, provider, rng)
    etypes = set(schema.entity_types)
    api_vertices = goal.api_vertices()
    if not api_vertices:
        raise GoalSamplingError("goal has no API calls")

    if rng.random() < variation.error_injection_rate and _has_templates(schema, ASK_UPDATE):
        b.seeker_turn(ASK_UPDATE, {}, {})
        b.nlg(PROMPT_SETUP)
        b.sys(SYS_WAIT)

    for i, api_v in enumerate(api_vertices):
        final = i == len(api_vertices) - 1
        sig = schema.signature(api_v.api_name)  # type: ignore[arg-type]
        arg_vertices: dict[str, GoalVertex] = {
            arg_name: goal.vertex(src) for src, arg_name in goal.incoming(api_v.vertex_id)
        }
        entity_args = [a for a in sig.required_args() if a.arg_type in etypes and a.arg_type != CONFIRM_TYPE]
        conf_args = [a for a in sig.required_args() if a.arg_type == CONFIRM_TYPE]

        partial_act = f"inform_{sig.name}_partial"
        go_partial = (
            entity_args
            and _has_templates(schema, partial_act)
            and rng.random() < variation.error_injection_rate
        )

        act = partial_act if go_partial else f"inform_{sig.name}"
        marker = None
        if not final:
            markers = schema.continuation_markers
            marker = markers[int(rng.integers(len(markers)))]

        slot_values: dict[str, str] = {}
        slot_types: dict[str, str] = {}
        if not go_partial:
            for a in entity_args:
                slot_values[a.arg_type] = arg_vertices[a.name].value  # type: ignore[assignment]
                slot_types[a.arg_type] = a.arg_type
        mentions = b.seeker_turn(act, slot_values, slot_types, marker=marker)

        bound: dict[str, ArgumentBinding] = {}
        mention_by_type = {m.entity_type: m for m in mentions}
        for a in entity_args:
            if a.arg_type in mention_by_type:
                bound[a.name] = b.mention_binding(mention_by_type[a.arg_type])

        clarified = False
        missing = [a for a in entity_args if a.name not in bound]
        while missing:
            clarified = True
            ask = missing[0]
            b.nlg(request_act(ask.arg_type))
            b.sys(SYS_WAIT)
            supplied = b.seeker_turn(
                f"supply_{ask.arg_type}",
                {ask.arg_type: arg_vertices[ask.name].value},  # type: ignore[dict-item]
                {ask.arg_type: ask.arg_type},
            )
            bound[ask.name] = b.mention_binding(supplied[0])
            missing = missing[1:]

        if sig.terminal:
            # destructive reset: review first, then confirm, then delete (the
            # canonical get-all -> notify -> wait -> confirm -> delete order)
            review = _review_signature(schema)
            if review is not None and conf_args:
                handle = b.api(review.name, {})
                b.nlg(
                    notify_act(review.name),
                    {api_result_arg(review.name): ArgumentBinding(BindingSource.API_RESULT, handle, result_ref=handle)},
                )
                b.sys(SYS_WAIT)
                conf_mention = _confirm_turn(b, arg_vertices, conf_args)
                bound[conf_args[0].name] = b.mention_binding(conf_mention)
            _fire(b, sig, bound)
            b.sys(SYS_END)
            break  # terminal API always ends the dialogue
        elif sig.destructive and conf_args:
            if entity_args:
                entity_arg = entity_args[0]
                b.nlg(confirm_act(sig.name), {entity_arg.name: bound[entity_arg.name]})
            else:
                b.nlg(confirm_act(sig.name))
            b.sys(SYS_WAIT)
            conf_mention = _confirm_turn(b, arg_vertices, conf_args)
            bound[conf_args[0].name] = b.mention_binding(conf_mention)
            _fire(b, sig, bound)
            b.sys(SYS_WAIT)
            if final:
                _closing_turn(b)
        else:
            _fire(b, sig, bound)
            if final and not clarified:
                b.sys(SYS_END)
            else:
                b.sys(SYS_WAIT)
                if final:
                    _closing_turn(b)

    meta = (("templates", ",".join(b.template_trace)),)
    return Dialogue(dialogue_id=dialogue_id, goal=goal, turns=tuple(b.turns), metadata=meta)


def _has_templates(schema: DomainSchema, act: str) -> bool:
    return bool(schema.templates_for(act, bank="seeker"))


def _review_signature(schema: DomainSchema) -> Optional[ActionSignature]:
    """The domain-wide retrieve API shown before a destructive reset, if any."""
    for s in schema.api_signatures():
        if s.kb_op == "retrieve" and s.domain is None:
            return s
    return None


def _confirm_turn(b: _TurnBuilder, arg_vertices: dict[str, GoalVertex], conf_args) -> EntityMention:
    conf_vertex = arg_vertices[conf_args[0].name]
    mentions = b.seeker_turn(CONFIRM, {CONFIRM_TYPE: conf_vertex.value}, {CONFIRM_TYPE: CONFIRM_TYPE})
    return mentions[0]


def _closing_turn(b: _TurnBuilder) -> None:
    b.seeker_turn(CLOSING, {}, {})
    b.sys(SYS_END)


def _fire(b: _TurnBuilder, sig: ActionSignature, bound: dict[str, ArgumentBinding]) -> None:
    handle = b.api(sig.name, bound)
    args = {}
    if sig.produces:
        args[api_result_arg(sig.name)] = ArgumentBinding(BindingSource.API_RESULT, handle, result_ref=handle)
    b.nlg(notify_act(sig.name), args)


@dataclass(frozen=True)
class CorpusStats:
    n_api: int
    n_dialogues: int
    n_actions: int
    n_turns: int

    def table(self) -> str:
        header = f"{'#API':>6} | {'#dialogues':>12} | {'#actions':>10} | {'#turns':>8}"
        row = f"{self.n_api:>6} | {self.n_dialogues:>12} | {self.n_actions:>10} | {self.n_turns:>8}"
        rule = "-" * len(header)
        return "\n".join([header, rule, row])


@dataclass(frozen=True)
class SimConfig:
    n_dialogues: int
    seed: int = 0
    variation: VariationConfig = field(default_factory=VariationConfig)

    def __post_init__(self):
        if self.n_dialogues < 1:
            raise ValueError("n_dialogues must be >= 1")


def generate_corpus(
    schema: DomainSchema,
    config: SimConfig,
    tm: Optional[TransitionMatrix] = None,
) -> tuple[list[Dialogue], CorpusStats]:
    """Simulate config.n_dialogues dialogues; deterministic given config.seed.

    Each dialogue uses an independent random stream derived from
    (seed, dialogue index), so parallel and serial generation agree.
    """
    if tm is None:
        tm = estimate_transitions(list(schema.seed_dialogues), config.variation.mixing_ratio, schema)
    seeker = SeekerPolicy(paraphrase_prob=config.variation.paraphrase_prob)
    provider = ProviderPolicy()
    seed_vals = seed_entity_values(schema)
    dialogues = []
    for i in range(config.n_dialogues):
        rng = np.random.default_rng([config.seed, i])
        goal = None
        for _attempt in range(50):
            try:
                goal = sample_goal(
                    tm,
                    schema,
                    rng,
                    transfer_prob=config.variation.transfer_prob,
                    entity_resample_prob=config.variation.entity_resample_prob,
                    seed_values=seed_vals,
                )
                break
            except GoalSamplingError:
                continue
        if goal is None:
            raise GoalSamplingError("could not sample a valid goal in 50 attempts")
        dialogues.append(
            run_interaction(goal, seeker, provider, schema, config.variation, rng,
                            dialogue_id=f"dlg-{config.seed}-{i}")
        )
    stats = CorpusStats(
        n_api=len(schema.api_signatures()),
        n_dialogues=len(dialogues),
        n_actions=sum(len(d.actions) for d in dialogues),
        n_turns=sum(len(d.turns) for d in dialogues),
    )
    return dialogues, stats


def split_out_of_sample(
    schema: DomainSchema,
    heldout_fraction: float,
    seed: int = 0,
) -> tuple[DomainSchema, DomainSchema]:
    """Hold out seeker paraphrases and catalog value slices for evaluation.

    The eval schema keeps only the held-out templates and samples entity values
    only from the held-out catalog slice; both sides keep the full catalogs as
    the feature gazetteer.  Train and eval template sets are disjoint.
    """
    if not 0.0 < heldout_fraction < 1.0:
        raise ValueError("heldout_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)

    train_templates: list[NlgTemplate] = []
    eval_templates: list[NlgTemplate] = []
    acts = sorted({t.act for t in schema.seeker_templates})
    for act in acts:
        group = schema.templates_for(act, bank="seeker")
        if len(group) < 2:
            raise InsufficientTemplatesError(f"act {act!r} has {len(group)} template(s); need >= 2 to split")
        k = max(1, round(heldout_fraction * len(group)))
        k = min(k, len(group) - 1)
        # the canonical wording (index 0) always stays on the train side: the
        # seed dialogues realize it, so holding it out would leak it anyway
        held = set((1 + rng.choice(len(group) - 1, size=k, replace=False)).tolist())
        for gi, t in enumerate(group):
            (eval_templates if gi in held else train_templates).append(t)

    train_slices: list[tuple[str, tuple[str, ...]]] = []
    eval_slices: list[tuple[str, tuple[str, ...]]] = []
    for cat in sorted(schema.catalogs, key=lambda c: c.entity_type):
        values = [normalize_value(v) for v in cat.values]
        if len(values) < 2:
            train_slices.append((cat.entity_type, tuple(values)))
            eval_slices.append((cat.entity_type, tuple(values)))
            continue
        k = max(1, round(heldout_fraction * len(values)))
        k = min(k, len(values) - 1)
        held = set(rng.choice(len(values), size=k, replace=False).tolist())
        eval_slices.append((cat.entity_type, tuple(v for i, v in enumerate(values) if i in held)))
        train_slices.append((cat.entity_type, tuple(v for i, v in enumerate(values) if i not in held)))

    train_schema = DomainSchema(
        signatures=schema.signatures,
        entity_types=schema.entity_types,
        catalogs=schema.catalogs,
        provider_templates=schema.provider_templates,
        seeker_templates=tuple(train_templates),
        seed_dialogues=schema.seed_dialogues,
        continuation_markers=schema.continuation_markers,
        sampling_values=tuple(train_slices),
    )
    eval_schema = DomainSchema(
        signatures=schema.signatures,
        entity_types=schema.entity_types,
        catalogs=schema.catalogs,
        provider_templates=schema.provider_templates,
        seeker_templates=tuple(eval_templates),
        seed_dialogues=schema.seed_dialogues,
        continuation_markers=schema.continuation_markers,
        sampling_values=tuple(eval_slices),
    )
    return train_schema, eval_schema
