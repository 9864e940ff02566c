"""Generate a small inspection batch (default 100 dialogues) and pretty-print
a few transcripts so the seed templates and flows can be eyeballed before
committing to a big simulation run.

  python scripts/smoke_batch.py [--n 100] [--show 5] [--seed 0]
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from prefteach.simulator import SimConfig, generate_corpus
from prefteach.types import load_default_schema


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=100)
    parser.add_argument("--show", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    schema = load_default_schema()
    dialogues, stats = generate_corpus(schema, SimConfig(n_dialogues=args.n, seed=args.seed))
    print(stats.table())
    for dlg in dialogues[: args.show]:
        print(f"\n--- {dlg.dialogue_id} ---")
        for turn in dlg.turns:
            ents = ", ".join(f"{m.entity_type}={m.value}" for m in turn.seeker_entities)
            print(f"U: {turn.seeker_utterance.text}" + (f"   [{ents}]" if ents else ""))
            for action in turn.provider_actions:
                print(f"   S: {action.kind.value:<4} {action.normalized_value()}")


if __name__ == "__main__":
    main()
