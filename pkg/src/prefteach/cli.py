"""pref-teach command line: simulate | train | eval | kb | serve | chat."""
from __future__ import annotations

import json
import os
from pathlib import Path

import click

from .evalharness import evaluate
from .kb import PreferenceKB
from .manager import handle_utterance, open_session, transcript_record
from .models import ModelBundle, TrainConfig, train as train_models
from .service import ServiceConfig, serve as run_service
from .simulator import SimConfig, VariationConfig, generate_corpus
from .types import (
    default_schema_path,
    load_schema,
    read_corpus,
    write_corpus,
)

CONFIG_ENV = "PREF_TEACH_CONFIG"


def _schema_option(path: str | None):
    if path:
        return load_schema(path)
    return load_schema(default_schema_path())


@click.group()
def main():
    """Teachable preference dialogue engine."""


@main.command()
@click.option("--schema", "schema_path", type=click.Path(exists=True), default=None,
              help="schema file (bundled default if omitted)")
@click.option("--n", "n_dialogues", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--error-rate", type=float, default=0.1, show_default=True)
@click.option("--paraphrase-prob", type=float, default=0.8, show_default=True)
@click.option("--transfer-prob", type=float, default=0.3, show_default=True)
def simulate(schema_path, n_dialogues, seed, out_path, error_rate, paraphrase_prob, transfer_prob):
    """Generate an annotated dialogue corpus."""
    schema = _schema_option(schema_path)
    variation = VariationConfig(
        error_injection_rate=error_rate,
        paraphrase_prob=paraphrase_prob,
        transfer_prob=transfer_prob,
    )
    dialogues, stats = generate_corpus(schema, SimConfig(n_dialogues, seed=seed, variation=variation))
    write_corpus(dialogues, out_path)
    click.echo(stats.table())
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--schema", "schema_path", type=click.Path(exists=True), default=None)
@click.option("--epochs", type=int, default=5, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--batch-size", type=int, default=4, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--catalog-features", type=click.Choice(["on", "off"]), default="on", show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def train(corpus_path, schema_path, epochs, lr, batch_size, seed, catalog_features, out_path):
    """Train NER + AP + AF jointly on an annotated corpus."""
    schema = _schema_option(schema_path)
    corpus = read_corpus(corpus_path)
    config = TrainConfig(
        epochs=epochs, lr=lr, batch_size=batch_size, seed=seed,
        catalog_features=catalog_features == "on",
    )
    bundle = train_models(corpus, schema, config)
    bundle.save(out_path)
    curve = ", ".join(f"{x:.4f}" for x in bundle.loss_curve)
    click.echo(f"epoch losses: {curve}")
    click.echo(f"wrote {out_path}")


@main.command("eval")
@click.option("--bundle", "bundle_path", type=click.Path(exists=True), required=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--schema", "schema_path", type=click.Path(exists=True), default=None)
@click.option("--report", "report_path", type=click.Path(), default=None)
def eval_cmd(bundle_path, corpus_path, schema_path, report_path):
    """Teacher-forced accuracy report (per-turn / per-action)."""
    schema = _schema_option(schema_path)
    bundle = ModelBundle.load(bundle_path)
    corpus = read_corpus(corpus_path)
    report = evaluate(corpus, bundle, schema)
    click.echo(report.stats.table())
    click.echo(report.table())
    if report_path:
        Path(report_path).write_text(
            report.table() + "\n\n" + json.dumps(report.to_json(), indent=2) + "\n",
            encoding="utf-8",
        )
        click.echo(f"wrote {report_path}")


@main.group()
def kb():
    """Inspect the preference knowledge base."""


@kb.command("dump")
@click.option("--kb", "kb_path", type=click.Path(), required=True)
@click.option("--user", "user_id", type=str, default=None, help="dump one user (all users if omitted)")
def kb_dump(kb_path, user_id):
    store = PreferenceKB(kb_path)
    users = [user_id] if user_id else store.all_users()
    for uid in users:
        for rec in store.retrieve_kb(uid):
            click.echo(json.dumps(rec.to_json(), sort_keys=True))


@main.command()
@click.option("--schema", "schema_path", type=click.Path(exists=True), default=None)
@click.option("--bundle", "bundle_path", type=click.Path(exists=True), required=True)
@click.option("--kb", "kb_path", type=click.Path(), required=True)
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--static-dir", type=click.Path(), default=None, help="serve a chat UI asset bundle")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help=f"JSON config file (or ${CONFIG_ENV})")
def serve(schema_path, bundle_path, kb_path, host, port, seed, static_dir, config_path):
    """Host the teaching session HTTP service."""
    config_path = config_path or os.environ.get(CONFIG_ENV)
    overrides = {}
    if config_path:
        overrides = json.loads(Path(config_path).read_text(encoding="utf-8"))
    config = ServiceConfig(
        schema_path=overrides.get("schema_path", schema_path or str(default_schema_path())),
        bundle_path=overrides.get("bundle_path", bundle_path),
        kb_path=overrides.get("kb_path", kb_path),
        host=overrides.get("host", host),
        port=overrides.get("port", port),
        seed=overrides.get("seed", seed),
        static_dir=overrides.get("static_dir", static_dir),
    )
    run_service(config)


@main.command()
@click.option("--schema", "schema_path", type=click.Path(exists=True), default=None)
@click.option("--bundle", "bundle_path", type=click.Path(exists=True), required=True)
@click.option("--kb", "kb_path", type=click.Path(), required=True)
@click.option("--user", "user_id", type=str, default="local-user", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--trace/--no-trace", default=True, show_default=True, help="print step traces")
def chat(schema_path, bundle_path, kb_path, user_id, seed, trace):
    """Interactive terminal teaching session.

    Commands: /prefs (show KB state), /export PATH (save transcript), /quit.
    """
    schema = _schema_option(schema_path)
    bundle = ModelBundle.load(bundle_path)
    bundle.check_schema(schema)
    store = PreferenceKB(kb_path, entity_types=schema.entity_types)
    session = open_session(user_id, seed=seed)
    click.echo(f"session {session.session_id} for {user_id}; /prefs /export /quit")
    while True:
        try:
            line = click.prompt("you", prompt_suffix="> ", default="", show_default=False)
        except (EOFError, click.exceptions.Abort):
            break
        line = line.strip()
        if not line:
            continue
        if line == "/quit":
            break
        if line == "/prefs":
            records = store.retrieve_kb(user_id)
            if not records:
                click.echo("(no stored preferences)")
            for rec in records:
                click.echo(json.dumps(rec.to_json(), sort_keys=True))
            continue
        if line.startswith("/export"):
            parts = line.split(maxsplit=1)
            path = parts[1] if len(parts) > 1 else "session_transcript.jsonl"
            Path(path).write_text(
                json.dumps(transcript_record(session), sort_keys=True) + "\n", encoding="utf-8"
            )
            click.echo(f"wrote {path}")
            continue
        if session.phase.value == "Ended":
            click.echo("(session ended; /quit or /export)")
            continue
        steps = handle_utterance(session, line, bundle, schema, store)
        for step in steps:
            if step.text:
                click.echo(f"agent: {step.text}")
            if trace:
                click.echo(f"  [{step.action.kind.value} {step.action.name} p={step.confidence:.2f}]")
    click.echo("bye")


if __name__ == "__main__":
    main()
