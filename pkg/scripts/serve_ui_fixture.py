"""Serve a live teaching service for the chat-UI end-to-end test.

Trains a small bundle on first use (cached under /tmp), starts the HTTP
service on --port with a fresh KB, and prints READY when health passes.
"""
from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from prefteach.kb import PreferenceKB
from prefteach.models import ModelBundle, TrainConfig, train
from prefteach.service import ServiceConfig, create_app
from prefteach.simulator import SimConfig, generate_corpus
from prefteach.types import load_default_schema

CACHE = Path(tempfile.gettempdir()) / "prefteach-ui-fixture-bundle.json"


def fixture_bundle(schema) -> ModelBundle:
    if CACHE.exists():
        bundle = ModelBundle.load(CACHE)
        if bundle.schema_fingerprint == schema.fingerprint():
            return bundle
    corpus, _ = generate_corpus(schema, SimConfig(n_dialogues=400, seed=5))
    bundle = train(corpus, schema, TrainConfig(epochs=6, lr=3e-3, batch_size=4, seed=0))
    bundle.save(CACHE)
    return bundle


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--port", type=int, default=8173)
    parser.add_argument("--host", type=str, default="127.0.0.1")
    args = parser.parse_args()

    schema = load_default_schema()
    bundle = fixture_bundle(schema)
    kb_dir = tempfile.mkdtemp(prefix="prefteach-ui-kb-")
    static_dir = Path(__file__).resolve().parents[1] / "frontend" / "static"
    config = ServiceConfig(
        schema_path="", bundle_path="", kb_path=kb_dir, seed=17,
        static_dir=str(static_dir) if static_dir.is_dir() else None,
    )
    kb = PreferenceKB(kb_dir, entity_types=schema.entity_types)
    app = create_app(schema, bundle, kb, config)

    import threading

    import uvicorn

    server = uvicorn.Server(uvicorn.Config(app, host=args.host, port=args.port, log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    import time
    import urllib.request

    for _ in range(100):
        try:
            with urllib.request.urlopen(f"http://{args.host}:{args.port}/api/health", timeout=1):
                break
        except Exception:
            time.sleep(0.2)
    print("READY", flush=True)
    thread.join()


if __name__ == "__main__":
    main()
