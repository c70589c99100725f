"""
Walk a small batch through the whole curation loop without any network:
a scripted backend replays canned model responses keyed by agent and
record id, so the run is deterministic and inspectable.
"""
from __future__ import annotations

import argparse
import tempfile

from cogforge.agents import Agents
from cogforge.gateway import ScriptedBackend
from cogforge.jsonl import write_rows
from cogforge.pairs import build_pairs
from cogforge.pipeline import PipelineConfig, run_crv
from cogforge.records import BetaSchedule, CoTRecord

# Three records, three different walks:
#   sum-1     rated medium, verifies on the first try      -> kept as-is
#   deriv-1   rated easy, rewrite verifies and re-rates    -> kept, rewritten
#   limit-1   rated medium, never verifies                 -> discarded
SCRIPT = {
    "critic:sum-1": ["medium", "medium", "medium"],
    "verifier:sum-1": ["YES"],
    "corruptor:sum-1": ["1 + 2 + ... + 100 = 100 * 101 = 10100"],
    "critic:deriv-1": ["easy", "easy", "easy", "medium", "medium", "medium"],
    "rethinker:deriv-1": [
        "Apply the power rule term by term: d/dx x^3 = 3x^2 and d/dx (-2x) = -2, "
        "so f'(x) = 3x^2 - 2. Check at x=1: f'(1) = 1."
    ],
    "verifier:deriv-1": ["YES"],
    "corruptor:deriv-1": ["d/dx x^3 = x^2, so f'(x) = x^2 - 2"],
    "critic:limit-1": ["medium", "hard", "medium"],
    "verifier:limit-1": ["NO", "NO", "NO"],
}

DATASET = [
    CoTRecord(
        id="sum-1",
        problem="Compute 1 + 2 + ... + 100.",
        answer="5050",
        reasoning="Pair terms: (1+100) + (2+99) + ... gives 50 pairs of 101, so 5050.",
    ),
    CoTRecord(
        id="deriv-1",
        problem="Differentiate f(x) = x^3 - 2x.",
        answer="f'(x) = 3x^2 - 2",
        reasoning="Power rule. 3x^2 - 2.",
    ),
    CoTRecord(
        id="limit-1",
        problem="Evaluate lim_{x->0} sin(x)/x.",
        answer="1",
        reasoning="Substitute x = 0 to get 0/0 = 1.",
    ),
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default=None, help="where to drop the JSONL outputs")
    args = parser.parse_args()
    out_dir = args.out_dir or tempfile.mkdtemp(prefix="curation-demo-")

    backend = ScriptedBackend(SCRIPT)
    curated, families, stats, discards = run_crv(DATASET, PipelineConfig(), Agents(backend))

    print("curated records:")
    for record in curated:
        print(f"  {record.id}: source={record.source.value}, rewrites={record.rewrite_count}")
        print(f"    reasoning: {record.reasoning[:72]}")
    print("discards:")
    for row in discards:
        print(f"  {row['id']}: {row['reason']} after {row['attempts']} attempts")

    print("\npreference pairs from the surviving families:")
    schedule = BetaSchedule()
    all_pairs = []
    for family in families:
        pairs = build_pairs(family, schedule)
        all_pairs.extend(pairs)
        for pair in pairs:
            print(f"  {pair.id}: gap={pair.gap.value}, beta={pair.beta}")

    write_rows(f"{out_dir}/curated.jsonl", [r.to_output_dict() for r in curated])
    write_rows(f"{out_dir}/families.jsonl", [f.to_dict() for f in families])
    write_rows(f"{out_dir}/pairs.jsonl", [p.to_dict() for p in all_pairs])
    print(f"\nwrote curated.jsonl, families.jsonl, pairs.jsonl under {out_dir}")
    print(f"stats: {stats.to_dict()}")


if __name__ == "__main__":
    main()
