"""Shared dialogue domain types: utterances, actions, dialogues, schemas.

Everything here is an immutable value object (frozen dataclasses), safe to
share across threads.  Serialization is canonical JSON so that
serialize(deserialize(x)) is byte-identical.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

SYS_WAIT = "wait_for_user_input"
SYS_END = "end_dialogue"
SYS_NAMES = (SYS_WAIT, SYS_END)

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)?|[^\sa-z0-9]")


class SchemaError(ValueError):
    """Schema file failed to parse or validate."""


class DanglingReferenceError(SchemaError):
    """A schema cross-reference points at a name that is not declared."""


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace+punctuation tokenization.

    Deterministic; punctuation becomes separate tokens; apostrophe
    contractions stay attached ("that's" -> ["that's"]).
    """
    return _TOKEN_RE.findall(text.lower())


def join_tokens(tokens: list[str]) -> str:
    return " ".join(tokens)


def normalize_value(value: str) -> str:
    """Canonical form used for catalog lookups: tokenize then re-join."""
    return join_tokens(tokenize(value))


class Speaker(str, Enum):
    SEEKER = "seeker"
    PROVIDER = "provider"


class ActionKind(str, Enum):
    API = "api"
    NLG = "nlg"
    SYS = "sys"


class BindingSource(str, Enum):
    SEEKER_ENTITY = "seeker_entity"
    API_RESULT = "api_result"
    CONSTANT = "constant"


@dataclass(frozen=True)
class Utterance:
    text: str
    tokens: tuple[str, ...]
    speaker: Speaker

    @classmethod
    def from_text(cls, text: str, speaker: Speaker) -> "Utterance":
        return cls(text=text, tokens=tuple(tokenize(text)), speaker=speaker)

    def to_json(self) -> dict:
        return {"text": self.text, "tokens": list(self.tokens), "speaker": self.speaker.value}

    @classmethod
    def from_json(cls, d: dict) -> "Utterance":
        return cls(text=d["text"], tokens=tuple(d["tokens"]), speaker=Speaker(d["speaker"]))


@dataclass(frozen=True)
class EntityMention:
    """A [start, end) token span of one typed entity in one utterance."""

    start: int
    end: int
    entity_type: str
    value: str

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad span [{self.start}, {self.end})")

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    def to_json(self) -> dict:
        return {
            "span": [self.start, self.end],
            "entity_type": self.entity_type,
            "value": self.value,
        }

    @classmethod
    def from_json(cls, d: dict) -> "EntityMention":
        return cls(start=d["span"][0], end=d["span"][1], entity_type=d["entity_type"], value=d["value"])


@dataclass(frozen=True)
class ArgumentBinding:
    """Provenance of one argument value.

    Exactly one payload is populated, matching source:
      seeker_entity -> (turn_index, span) plus the surface value
      api_result    -> result_ref
      constant      -> literal
    """

    source: BindingSource
    value: str
    turn_index: Optional[int] = None
    span: Optional[tuple[int, int]] = None
    result_ref: Optional[str] = None

    def __post_init__(self):
        if self.source is BindingSource.SEEKER_ENTITY:
            ok = self.turn_index is not None and self.span is not None and self.result_ref is None
        elif self.source is BindingSource.API_RESULT:
            ok = self.result_ref is not None and self.turn_index is None and self.span is None
        else:
            ok = self.result_ref is None and self.turn_index is None and self.span is None
        if not ok:
            raise ValueError(f"binding payload does not match source {self.source}")

    def to_json(self) -> dict:
        d: dict = {"source": self.source.value, "value": self.value}
        if self.source is BindingSource.SEEKER_ENTITY:
            d["turn_index"] = self.turn_index
            d["span"] = list(self.span)  # type: ignore[arg-type]
        elif self.source is BindingSource.API_RESULT:
            d["result_ref"] = self.result_ref
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ArgumentBinding":
        src = BindingSource(d["source"])
        return cls(
            source=src,
            value=d["value"],
            turn_index=d.get("turn_index"),
            span=tuple(d["span"]) if d.get("span") is not None else None,
            result_ref=d.get("result_ref"),
        )


@dataclass(frozen=True)
class ActionRecord:
    """One provider step: an API call, an NLG realization, or a SYS control action."""

    kind: ActionKind
    name: str
    args: tuple[tuple[str, ArgumentBinding], ...] = ()
    result_ref: Optional[str] = None
    text: Optional[str] = None  # rendered surface form, NLG only

    def __post_init__(self):
        if self.kind is ActionKind.SYS and self.name not in SYS_NAMES:
            raise ValueError(f"unknown SYS action {self.name!r}")
        if self.kind is not ActionKind.API and self.result_ref is not None:
            raise ValueError("only API actions may carry a result_ref")

    @property
    def arg_map(self) -> dict[str, ArgumentBinding]:
        return dict(self.args)

    def normalized_value(self) -> str:
        """Compact call-style rendering, e.g. getAllAffinityAction() -> getAllPreferenceResult1."""
        inner = ", ".join(f"{k}={b.value}" for k, b in self.args)
        s = f"{self.name}({inner})"
        if self.result_ref:
            s += f" -> {self.result_ref}"
        return s

    def to_json(self) -> dict:
        d: dict = {
            "type": self.kind.value,
            "name": self.name,
            "normalized_value": self.normalized_value(),
            "args": {k: b.to_json() for k, b in self.args},
        }
        if self.result_ref is not None:
            d["result_ref"] = self.result_ref
        if self.text is not None:
            d["text"] = self.text
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ActionRecord":
        return cls(
            kind=ActionKind(d["type"]),
            name=d["name"],
            args=tuple(sorted((k, ArgumentBinding.from_json(v)) for k, v in d["args"].items())),
            result_ref=d.get("result_ref"),
            text=d.get("text"),
        )


@dataclass(frozen=True)
class ArgumentSpec:
    name: str
    arg_type: str
    required: bool = True


@dataclass(frozen=True)
class ActionSignature:
    name: str
    kind: ActionKind
    arguments: tuple[ArgumentSpec, ...] = ()
    produces: Optional[str] = None
    # KB side effects for API actions: op in {upsert, delete, delete_all, retrieve, none}
    kb_op: Optional[str] = None
    domain: Optional[str] = None
    polarity: Optional[str] = None
    value_arg: Optional[str] = None
    condition_arg: Optional[str] = None
    destructive: bool = False
    terminal: bool = False

    def __post_init__(self):
        names = [a.name for a in self.arguments]
        if len(names) != len(set(names)):
            raise SchemaError(f"duplicate argument names in signature {self.name}")

    def required_args(self) -> tuple[ArgumentSpec, ...]:
        return tuple(a for a in self.arguments if a.required)

    def to_json(self) -> dict:
        d: dict = {
            "name": self.name,
            "kind": self.kind.value,
            "arguments": [
                {"name": a.name, "arg_type": a.arg_type, "required": a.required}
                for a in self.arguments
            ],
        }
        for f in ("produces", "kb_op", "domain", "polarity", "value_arg", "condition_arg"):
            v = getattr(self, f)
            if v is not None:
                d[f] = v
        if self.destructive:
            d["destructive"] = True
        if self.terminal:
            d["terminal"] = True
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ActionSignature":
        return cls(
            name=d["name"],
            kind=ActionKind(d["kind"]),
            arguments=tuple(
                ArgumentSpec(a["name"], a["arg_type"], a.get("required", True))
                for a in d["arguments"]
            ),
            produces=d.get("produces"),
            kb_op=d.get("kb_op"),
            domain=d.get("domain"),
            polarity=d.get("polarity"),
            value_arg=d.get("value_arg"),
            condition_arg=d.get("condition_arg"),
            destructive=d.get("destructive", False),
            terminal=d.get("terminal", False),
        )


@dataclass(frozen=True)
class Turn:
    """One seeker utterance plus the provider's full response up to the control handoff."""

    seeker_utterance: Utterance
    seeker_entities: tuple[EntityMention, ...]
    seeker_acts: tuple[str, ...]  # seeker-side NLG act names, section 3.3 style "user NLG list"
    provider_actions: tuple[ActionRecord, ...]
    # opaque annotation strings carried through the corpus format; the
    # distinction between the two normalization levels is not interpreted
    partially_normalized_value: Optional[str] = None
    fully_normalized_value: Optional[str] = None

    def __post_init__(self):
        if not self.provider_actions or self.provider_actions[-1].kind is not ActionKind.SYS:
            raise ValueError("provider_actions must end with a SYS action")
        spans = sorted((m.start, m.end) for m in self.seeker_entities)
        for (s1, e1), (s2, _e2) in zip(spans, spans[1:]):
            if s2 < e1:
                raise ValueError("overlapping entity mentions")
        for m in self.seeker_entities:
            if m.end > len(self.seeker_utterance.tokens):
                raise ValueError("entity span outside utterance")

    def to_json(self) -> dict:
        user: dict = {
            "utterance": self.seeker_utterance.to_json(),
            "entities": [m.to_json() for m in self.seeker_entities],
            "user_nlgs": list(self.seeker_acts),
        }
        if self.partially_normalized_value is not None:
            user["partially_normalized_value"] = self.partially_normalized_value
        if self.fully_normalized_value is not None:
            user["fully_normalized_value"] = self.fully_normalized_value
        return {
            "user": user,
            "actions": [a.to_json() for a in self.provider_actions],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Turn":
        return cls(
            seeker_utterance=Utterance.from_json(d["user"]["utterance"]),
            seeker_entities=tuple(EntityMention.from_json(m) for m in d["user"]["entities"]),
            seeker_acts=tuple(d["user"]["user_nlgs"]),
            provider_actions=tuple(ActionRecord.from_json(a) for a in d["actions"]),
            partially_normalized_value=d["user"].get("partially_normalized_value"),
            fully_normalized_value=d["user"].get("fully_normalized_value"),
        )


@dataclass(frozen=True)
class GoalVertex:
    """Vertex of the entity transfer graph: a seeker entity or an API call."""

    vertex_id: int
    kind: str  # "seeker_entity" | "api_call"
    entity_type: Optional[str] = None
    value: Optional[str] = None
    api_name: Optional[str] = None

    def to_json(self) -> dict:
        d: dict = {"id": self.vertex_id, "kind": self.kind}
        if self.kind == "seeker_entity":
            d["entity_type"] = self.entity_type
            d["value"] = self.value
        else:
            d["api_name"] = self.api_name
        return d

    @classmethod
    def from_json(cls, d: dict) -> "GoalVertex":
        return cls(
            vertex_id=d["id"],
            kind=d["kind"],
            entity_type=d.get("entity_type"),
            value=d.get("value"),
            api_name=d.get("api_name"),
        )


@dataclass(frozen=True)
class EntityTransferGraph:
    """DAG of seeker-entity and API-call vertices; edges carry argument names."""

    vertices: tuple[GoalVertex, ...]
    edges: tuple[tuple[int, int, str], ...]  # (producer_id, consumer_id, argument_name)

    def api_vertices(self) -> list[GoalVertex]:
        return [v for v in self.vertices if v.kind == "api_call"]

    def incoming(self, vertex_id: int) -> list[tuple[int, str]]:
        return [(src, arg) for src, dst, arg in self.edges if dst == vertex_id]

    def vertex(self, vertex_id: int) -> GoalVertex:
        return self.vertices[vertex_id]

    def is_acyclic(self) -> bool:
        order = {v.vertex_id: i for i, v in enumerate(self.vertices)}
        return all(order[src] < order[dst] for src, dst, _ in self.edges)

    def to_json(self) -> dict:
        return {
            "vertices": [v.to_json() for v in self.vertices],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_json(cls, d: dict) -> "EntityTransferGraph":
        return cls(
            vertices=tuple(GoalVertex.from_json(v) for v in d["vertices"]),
            edges=tuple((e[0], e[1], e[2]) for e in d["edges"]),
        )


@dataclass(frozen=True)
class Dialogue:
    dialogue_id: str
    goal: EntityTransferGraph
    turns: tuple[Turn, ...]
    metadata: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.turns:
            last = self.turns[-1].provider_actions[-1]
            if last.name != SYS_END:
                raise ValueError("dialogue must end with end_dialogue")
        produced: set[str] = set()
        for turn in self.turns:
            for act in turn.provider_actions:
                for _name, binding in act.args:
                    if binding.source is BindingSource.API_RESULT and binding.result_ref not in produced:
                        raise ValueError(f"result {binding.result_ref} referenced before production")
                if act.result_ref:
                    produced.add(act.result_ref)

    @property
    def actions(self) -> list[ActionRecord]:
        return [a for t in self.turns for a in t.provider_actions]

    def to_json(self) -> dict:
        return {
            "id": self.dialogue_id,
            "goal": self.goal.to_json(),
            "turns": [t.to_json() for t in self.turns],
            "metadata": {k: v for k, v in self.metadata},
        }

    @classmethod
    def from_json(cls, d: dict) -> "Dialogue":
        return cls(
            dialogue_id=d["id"],
            goal=EntityTransferGraph.from_json(d["goal"]),
            turns=tuple(Turn.from_json(t) for t in d["turns"]),
            metadata=tuple(sorted(d.get("metadata", {}).items())),
        )


@dataclass(frozen=True)
class Catalog:
    """Known surface values for one entity type. Lookup is case-insensitive."""

    entity_type: str
    values: tuple[str, ...]

    def __post_init__(self):
        if not self.values:
            raise SchemaError(f"catalog {self.entity_type} has no values")

    def normalized(self) -> set[str]:
        return {normalize_value(v) for v in self.values}

    def to_json(self) -> dict:
        return {"entity_type": self.entity_type, "values": list(self.values)}

    @classmethod
    def from_json(cls, d: dict) -> "Catalog":
        return cls(entity_type=d["entity_type"], values=tuple(d["values"]))


@dataclass(frozen=True)
class NlgTemplate:
    act: str
    text: str  # slot syntax: {entity_type} or {argument_name}

    def slots(self) -> list[str]:
        return re.findall(r"\{(\w+)\}", self.text)

    def to_json(self) -> dict:
        return {"act": self.act, "text": self.text}

    @classmethod
    def from_json(cls, d: dict) -> "NlgTemplate":
        return cls(act=d["act"], text=d["text"])


@dataclass(frozen=True)
class DomainSchema:
    """Action signatures, entity types, catalogs, template banks, and seed dialogues."""

    signatures: tuple[ActionSignature, ...]
    entity_types: tuple[str, ...]
    catalogs: tuple[Catalog, ...]
    provider_templates: tuple[NlgTemplate, ...]
    seeker_templates: tuple[NlgTemplate, ...]
    seed_dialogues: tuple[Dialogue, ...]
    continuation_markers: tuple[str, ...] = ("also", "and", "one more thing", "next")
    # catalog slice used when *sampling* entity values; full catalogs stay available
    # as the gazetteer for features and validation. None = sample from everything.
    sampling_values: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def signature(self, name: str) -> ActionSignature:
        for s in self.signatures:
            if s.name == name:
                return s
        raise KeyError(name)

    def api_signatures(self) -> list[ActionSignature]:
        return [s for s in self.signatures if s.kind is ActionKind.API]

    def catalog(self, entity_type: str) -> Catalog:
        for c in self.catalogs:
            if c.entity_type == entity_type:
                return c
        raise KeyError(entity_type)

    def sampling_catalog(self, entity_type: str) -> tuple[str, ...]:
        for etype, values in self.sampling_values:
            if etype == entity_type:
                return values
        return self.catalog(entity_type).values

    def result_types(self) -> set[str]:
        return {s.produces for s in self.signatures if s.produces}

    def action_inventory(self) -> list[tuple[ActionKind, str]]:
        names = [(s.kind, s.name) for s in self.signatures]
        names.append((ActionKind.SYS, SYS_WAIT))
        names.append((ActionKind.SYS, SYS_END))
        return sorted(set(names), key=lambda kn: (kn[0].value, kn[1]))

    def seeker_acts(self) -> list[str]:
        return sorted({t.act for t in self.seeker_templates})

    def templates_for(self, act: str, bank: str = "provider") -> list[NlgTemplate]:
        source = self.provider_templates if bank == "provider" else self.seeker_templates
        return [t for t in source if t.act == act]

    def fingerprint(self) -> str:
        """Stable identity of the model-facing parts of the schema.

        Covers signatures and entity types only: catalogs and template banks may
        be extended or held out without invalidating a trained bundle.
        """
        payload = {
            "signatures": [s.to_json() for s in sorted(self.signatures, key=lambda s: s.name)],
            "entity_types": sorted(self.entity_types),
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def to_json(self) -> dict:
        d: dict = {
            "signatures": [s.to_json() for s in self.signatures],
            "entity_types": list(self.entity_types),
            "catalogs": [c.to_json() for c in self.catalogs],
            "provider_templates": [t.to_json() for t in self.provider_templates],
            "seeker_templates": [t.to_json() for t in self.seeker_templates],
            "seed_dialogues": [s.to_json() for s in self.seed_dialogues],
            "continuation_markers": list(self.continuation_markers),
        }
        if self.sampling_values:
            d["sampling_values"] = {k: list(v) for k, v in self.sampling_values}
        return d

    @classmethod
    def from_json(cls, d: dict) -> "DomainSchema":
        return cls(
            signatures=tuple(ActionSignature.from_json(s) for s in d["signatures"]),
            entity_types=tuple(d["entity_types"]),
            catalogs=tuple(Catalog.from_json(c) for c in d["catalogs"]),
            provider_templates=tuple(NlgTemplate.from_json(t) for t in d["provider_templates"]),
            seeker_templates=tuple(NlgTemplate.from_json(t) for t in d["seeker_templates"]),
            seed_dialogues=tuple(Dialogue.from_json(s) for s in d["seed_dialogues"]),
            continuation_markers=tuple(d.get("continuation_markers", ("also", "and", "one more thing", "next"))),
            sampling_values=tuple(sorted((k, tuple(v)) for k, v in d.get("sampling_values", {}).items())),
        )


def canonical_json(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def validate_schema(schema: DomainSchema) -> None:
    """Cross-reference validation; raises DanglingReferenceError naming the offender."""
    etypes = set(schema.entity_types)
    result_types = schema.result_types()
    catalog_types = {c.entity_type for c in schema.catalogs}

    for c in schema.catalogs:
        if c.entity_type not in etypes:
            raise DanglingReferenceError(f"catalog for undeclared entity type {c.entity_type!r}")
    for etype in etypes:
        if etype not in catalog_types:
            raise DanglingReferenceError(f"entity type {etype!r} has no catalog")

    sig_names = {s.name for s in schema.signatures}
    for s in schema.signatures:
        for a in s.arguments:
            if a.arg_type not in etypes and a.arg_type not in result_types:
                raise DanglingReferenceError(
                    f"signature {s.name!r} argument {a.name!r} has unknown type {a.arg_type!r}"
                )
        for argref in (s.value_arg, s.condition_arg):
            if argref is not None and argref not in {a.name for a in s.arguments}:
                raise DanglingReferenceError(f"signature {s.name!r} references unknown argument {argref!r}")

    for t in schema.provider_templates + schema.seeker_templates:
        for slot in t.slots():
            if slot not in etypes and slot not in result_types and not _slot_is_signature_arg(schema, t.act, slot):
                raise DanglingReferenceError(f"template for act {t.act!r} has unknown slot {slot!r}")

    for etype, values in schema.sampling_values:
        if etype not in catalog_types:
            raise DanglingReferenceError(f"sampling slice for unknown entity type {etype!r}")
        full = schema.catalog(etype).normalized()
        for v in values:
            if normalize_value(v) not in full:
                raise DanglingReferenceError(f"sampling value {v!r} not in catalog {etype!r}")

    for dlg in schema.seed_dialogues:
        for turn in dlg.turns:
            for act in turn.provider_actions:
                if act.kind is ActionKind.SYS:
                    continue
                if act.name not in sig_names:
                    raise DanglingReferenceError(f"seed dialogue {dlg.dialogue_id} uses unknown action {act.name!r}")


def _slot_is_signature_arg(schema: DomainSchema, act: str, slot: str) -> bool:
    try:
        sig = schema.signature(act)
    except KeyError:
        return False
    return slot in {a.name for a in sig.arguments}


def load_schema(path: str | Path) -> DomainSchema:
    """Load and validate a schema file; raises SchemaError with context on failure."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: parse error at line {e.lineno}: {e.msg}") from e
    try:
        schema = DomainSchema.from_json(raw)
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, SchemaError):
            raise
        raise SchemaError(f"{path}: malformed schema: {e}") from e
    validate_schema(schema)
    return schema


def dump_schema(schema: DomainSchema, path: str | Path) -> None:
    Path(path).write_text(canonical_json(schema.to_json()) + "\n", encoding="utf-8")


def default_schema_path() -> Path:
    return Path(__file__).parent / "data" / "default_schema.json"


def load_default_schema() -> DomainSchema:
    return load_schema(default_schema_path())


def write_corpus(dialogues: list[Dialogue], path: str | Path) -> None:
    """One dialogue per line, canonical JSON records."""
    with open(path, "w", encoding="utf-8") as f:
        for d in dialogues:
            f.write(canonical_json(d.to_json()) + "\n")


def read_corpus(path: str | Path) -> list[Dialogue]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(Dialogue.from_json(json.loads(line)))
    return out
