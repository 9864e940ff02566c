"""Teacher-forced evaluation: per-model and end-to-end accuracy at turn and
action level, dataset construction with held-out paraphrases/catalog slices,
and the catalog-feature ablation.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from .encoder import EncoderConfig
from .models import (
    AnnotationGapError,
    ModelBundle,
    NoLegalCandidateError,
    TrainConfig,
    extract_steps,
    train,
)
from .simulator import CorpusStats, SimConfig, generate_corpus, split_out_of_sample
from .types import Dialogue, DomainSchema

ROWS = ("NER", "AP", "AF", "AP+AF", "NER+AP+AF")


@dataclass
class EvalReport:
    per_turn: dict[str, float]
    per_action: dict[str, float]
    counts: dict[str, tuple[int, int, int, int]]  # row -> (turn_ok, turns, act_ok, acts)
    stats: CorpusStats
    config_fingerprint: str

    def row(self, name: str) -> tuple[float, float]:
        return self.per_turn[name], self.per_action[name]

    def table(self) -> str:
        lines = [f"{'model':<14} | {'ACC per-turn':>12} | {'ACC per-action':>14}"]
        lines.append("-" * len(lines[0]))
        for name in ROWS:
            lines.append(
                f"{name:<14} | {self.per_turn[name] * 100:>11.2f}% | {self.per_action[name] * 100:>13.2f}%"
            )
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "per_turn": self.per_turn,
            "per_action": self.per_action,
            "counts": {k: list(v) for k, v in self.counts.items()},
            "stats": {
                "n_api": self.stats.n_api,
                "n_dialogues": self.stats.n_dialogues,
                "n_actions": self.stats.n_actions,
                "n_turns": self.stats.n_turns,
            },
            "config_fingerprint": self.config_fingerprint,
        }


def evaluate(corpus: list[Dialogue], predictor, schema: DomainSchema) -> EvalReport:
    """Score each model against gold annotations while feeding gold history.

    A turn is correct for a model iff every one of its predictions in that
    turn is correct; per-action accuracy counts individual actions.  The
    NER per-action cell is entity-level accuracy (gold entities recovered
    exactly); the end-to-end row requires NER, AP and AF all correct.
    AF counts every action, vacuously correct when an action has no
    arguments, so AF == AP+AF whenever AP is perfect.
    """
    enc_config = (
        predictor.encoder_config() if hasattr(predictor, "encoder_config") else EncoderConfig()
    )
    tallies = {name: [0, 0, 0, 0] for name in ROWS}  # turn_ok, turns, act_ok, acts
    ner_entities_ok = 0
    ner_entities_total = 0
    gaps: list[str] = []

    for dialogue in corpus:
        utt_examples, step_examples = extract_steps(dialogue, schema, enc_config)
        ner_turn_ok: dict[int, bool] = {}
        for ue in utt_examples:
            predicted = predictor.predict_entities(ue.tokens, schema)
            pred_set = {(m.start, m.end, m.entity_type) for m in predicted}
            gold_set = set(ue.gold_spans)
            ner_turn_ok[ue.turn_index] = pred_set == gold_set
            ner_entities_ok += len(pred_set & gold_set)
            ner_entities_total += len(gold_set)

        turn_flags: dict[int, dict[str, bool]] = {}
        turn_of_step = _steps_to_turns(dialogue)

        for row in ROWS:
            for t in range(len(dialogue.turns)):
                turn_flags.setdefault(t, {})[row] = True

        for step, t in zip(step_examples, turn_of_step):
            ce, _cache = predictor.encode(step.state, schema)
            ranked = predictor.predict_actions(ce)
            ap_ok = ranked[0][0] is step.gold_kind and ranked[0][1] == step.gold_name

            af_ok = True
            candidates = step.state.candidates()
            cand_keys = {c.key for c in candidates}
            for arg_name, arg_type, gold_key in step.gold_args:
                if gold_key not in cand_keys:
                    gaps.append(dialogue.dialogue_id)
                    af_ok = False
                    continue
                try:
                    cand, _p = predictor.fill_argument(ce, step.state, step.gold_name, arg_name, arg_type)
                except NoLegalCandidateError:
                    af_ok = False
                    continue
                if cand.key != gold_key:
                    af_ok = False

            flags = {
                "AP": ap_ok,
                "AF": af_ok,
                "AP+AF": ap_ok and af_ok,
                "NER+AP+AF": ner_turn_ok.get(t, True) and ap_ok and af_ok,
            }
            for row, ok in flags.items():
                tallies[row][3] += 1
                tallies[row][2] += int(ok)
                turn_flags[t][row] = turn_flags[t][row] and ok

        for t in range(len(dialogue.turns)):
            nok = ner_turn_ok.get(t, True)
            tallies["NER"][1] += 1
            tallies["NER"][0] += int(nok)
            for row in ("AP", "AF", "AP+AF"):
                tallies[row][1] += 1
                tallies[row][0] += int(turn_flags[t][row])
            tallies["NER+AP+AF"][1] += 1
            tallies["NER+AP+AF"][0] += int(turn_flags[t]["NER+AP+AF"] and nok)

    if gaps:
        raise AnnotationGapError(f"gold bindings missing from context in dialogues: {sorted(set(gaps))}")

    tallies["NER"][2] = ner_entities_ok
    tallies["NER"][3] = ner_entities_total

    per_turn = {}
    per_action = {}
    for row, (tok, tn, aok, an) in tallies.items():
        per_turn[row] = tok / tn if tn else 1.0
        per_action[row] = aok / an if an else 1.0

    stats = CorpusStats(
        n_api=len(schema.api_signatures()),
        n_dialogues=len(corpus),
        n_actions=sum(len(d.actions) for d in corpus),
        n_turns=sum(len(d.turns) for d in corpus),
    )
    fp_src = {
        "schema": schema.fingerprint(),
        "n_dialogues": stats.n_dialogues,
        "predictor": getattr(predictor, "schema_fingerprint", predictor.__class__.__name__),
    }
    fingerprint = hashlib.sha256(json.dumps(fp_src, sort_keys=True).encode()).hexdigest()[:12]
    return EvalReport(
        per_turn=per_turn,
        per_action=per_action,
        counts={k: tuple(v) for k, v in tallies.items()},
        stats=stats,
        config_fingerprint=fingerprint,
    )


def _steps_to_turns(dialogue: Dialogue) -> list[int]:
    out = []
    for t, turn in enumerate(dialogue.turns):
        out.extend([t] * len(turn.provider_actions))
    return out


@dataclass
class EvalSets:
    train_corpus: list[Dialogue]
    in_sample: list[Dialogue]
    out_of_sample: list[Dialogue]
    train_schema: DomainSchema
    eval_schema: DomainSchema
    stats: dict[str, CorpusStats] = field(default_factory=dict)

    def stats_table(self) -> str:
        blocks = []
        for name in ("train", "in_sample", "out_of_sample"):
            blocks.append(f"[{name}]\n{self.stats[name].table()}")
        return "\n\n".join(blocks)


def build_eval_sets(
    schema: DomainSchema,
    n_train: int = 2000,
    n_eval: int = 200,
    heldout_fraction: float = 0.25,
    seed: int = 0,
    variation=None,
) -> EvalSets:
    """Training corpus plus in-sample (fresh seed, training distribution) and
    out-of-sample (held-out paraphrases + held-out catalog slices) eval sets."""
    train_schema, eval_schema = split_out_of_sample(schema, heldout_fraction, seed=seed)
    kwargs = {"variation": variation} if variation is not None else {}
    train_corpus, train_stats = generate_corpus(train_schema, SimConfig(n_train, seed=seed + 1, **kwargs))
    in_sample, in_stats = generate_corpus(train_schema, SimConfig(n_eval, seed=seed + 2, **kwargs))
    oos, oos_stats = generate_corpus(eval_schema, SimConfig(n_eval, seed=seed + 3, **kwargs))
    return EvalSets(
        train_corpus=train_corpus,
        in_sample=in_sample,
        out_of_sample=oos,
        train_schema=train_schema,
        eval_schema=eval_schema,
        stats={"train": train_stats, "in_sample": in_stats, "out_of_sample": oos_stats},
    )


def ablate_catalog_features(
    schema: DomainSchema,
    seed: int = 0,
    n_train: int = 600,
    n_eval: int = 150,
    epochs: int = 5,
    lr: float = 3e-3,
    batch_size: int = 4,
) -> tuple[EvalReport, EvalReport, ModelBundle, ModelBundle]:
    """Train two bundles differing only in the catalog-features flag and
    evaluate both on an out-of-sample set with held-out catalog values."""
    sets = build_eval_sets(schema, n_train=n_train, n_eval=n_eval, seed=seed)
    cfg_on = TrainConfig(epochs=epochs, lr=lr, batch_size=batch_size, seed=seed, catalog_features=True)
    cfg_off = TrainConfig(epochs=epochs, lr=lr, batch_size=batch_size, seed=seed, catalog_features=False)
    bundle_on = train(sets.train_corpus, sets.train_schema, cfg_on)
    bundle_off = train(sets.train_corpus, sets.train_schema, cfg_off)
    report_on = evaluate(sets.out_of_sample, bundle_on, sets.eval_schema)
    report_off = evaluate(sets.out_of_sample, bundle_off, sets.eval_schema)
    return report_on, report_off, bundle_on, bundle_off
