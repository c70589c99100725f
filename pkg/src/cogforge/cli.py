"""Command-line driver.

Subcommands: curate (run the full curation pipeline), pairs (build preference
pairs from curated families), loss-eval (score externally computed
log-probabilities), selftest (numeric and prompt-conformance checks).

Exit codes are a stable contract: 0 clean, 1 fatal error, 2 completed with
some records discarded. The last stdout line of curate/pairs/loss-eval is a
single JSON object for machine consumption.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from .agents import GOLDEN_INPUTS, TEMPLATE_NAMES, Agents, load_golden_fixture, load_templates
from .config import AppConfig, load_config, load_schedule
from .gateway import (
    ConfigError,
    GatewayError,
    HTTPBackend,
    ScriptedBackend,
    load_script,
)
from .jsonl import read_rows, write_rows
from .loss import (
    JoinError,
    TokenPair,
    ToyPolicy,
    cogpo_loss,
    dpo_loss,
    grad_check,
    join_quads,
)
from .pairs import EmptyFamily, assign_beta, build_pairs, count_by_gap
from .pipeline import CorruptCheckpoint, DuplicateId, run_crv
from .records import BetaSchedule, CoTRecord, GapType, LogProbQuad, RecordFamily

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cogforge",
        description="Curate chain-of-thought data and build gap-weighted preference pairs.",
    )
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    curate = commands.add_parser("curate", help="run the curation pipeline over a JSONL dataset")
    curate.add_argument("--input", required=True, help="input JSONL: id, problem, answer, reasoning")
    curate.add_argument("--output", required=True, help="curated-records JSONL")
    curate.add_argument("--discards", help="discard-log JSONL (default: derived from --output)")
    curate.add_argument("--families", help="record-families JSONL (default: derived from --output)")
    curate.add_argument("--checkpoint", help="checkpoint JSON for interrupt/resume")
    curate.add_argument("--mock-script", help="scripted-backend JSONL for offline runs")
    curate.set_defaults(func=cmd_curate)

    pairs = commands.add_parser("pairs", help="build preference pairs from a families file")
    pairs.add_argument("--families", required=True, help="families JSONL from curate")
    pairs.add_argument("--output", required=True, help="pair JSONL")
    pairs.set_defaults(func=cmd_pairs)

    loss_eval = commands.add_parser(
        "loss-eval", help="evaluate the preference loss over external log-probabilities"
    )
    loss_eval.add_argument("--pairs", required=True, help="pair JSONL from the pairs subcommand")
    loss_eval.add_argument("--logprobs", required=True, help="log-prob JSONL keyed by pair id")
    loss_eval.add_argument("--schedule", help="YAML file overriding the beta schedule")
    loss_eval.add_argument("--output", help="per-pair report JSONL")
    loss_eval.set_defaults(func=cmd_loss_eval)

    selftest = commands.add_parser("selftest", help="run the built-in verification suite")
    selftest.add_argument("--inject-gradient-fault", action="store_true", help=argparse.SUPPRESS)
    selftest.set_defaults(func=cmd_selftest)
    return parser


def entrypoint(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (GatewayError, CorruptCheckpoint, DuplicateId, JoinError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


def main() -> None:
    sys.exit(entrypoint())


def _derived_path(output: str, tag: str) -> str:
    stem, _ = os.path.splitext(output)
    return f"{stem}.{tag}.jsonl"


def _build_backend(config: AppConfig, mock_script: str | None):
    if mock_script:
        return ScriptedBackend(load_script(mock_script))
    if not config.endpoints:
        raise ConfigError("no endpoints configured; supply a config file or --mock-script")
    return HTTPBackend(config.endpoints)


def _load_dataset(path: str) -> list[CoTRecord]:
    dataset = []
    for row in read_rows(path):
        try:
            dataset.append(
                CoTRecord(
                    id=str(row["id"]), problem=row["problem"], answer=row["answer"],
                    reasoning=row["reasoning"],
                )
            )
        except KeyError as exc:
            raise ValueError(f"{path}: input row missing field {exc}") from exc
    return dataset


def cmd_curate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.checkpoint:
        config.pipeline.checkpoint_path = args.checkpoint
    backend = _build_backend(config, args.mock_script)
    agents = Agents(
        backend,
        templates=load_templates(config.templates_dir),
        sampling=config.sampling,
        verifier_role=config.pipeline.verifier_role,
        corruption_gate=config.pipeline.corruption_gate,
    )
    dataset = _load_dataset(args.input)
    curated, families, stats, discards = run_crv(dataset, config.pipeline, agents)

    write_rows(args.output, [record.to_output_dict() for record in curated])
    discards_path = args.discards or _derived_path(args.output, "discards")
    families_path = args.families or _derived_path(args.output, "families")
    write_rows(discards_path, discards)
    write_rows(families_path, [family.to_dict() for family in families])

    by_level = ", ".join(f"{level} {count}" for level, count in stats.intake_by_level.items())
    print(f"intake: {stats.intake_total} ({by_level})")
    print(f"curated: {stats.final_size} ({stats.rewritten} rewritten), discarded: {stats.discarded}")
    print(f"wrote {args.output}, {families_path}, {discards_path}")
    print(json.dumps(stats.to_dict(), sort_keys=True))
    return EXIT_PARTIAL if discards else EXIT_OK


def cmd_pairs(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    families = [RecordFamily.from_dict(row) for row in read_rows(args.families)]
    built = []
    skipped = 0
    for family in families:
        try:
            built.extend(build_pairs(family, config.schedule))
        except EmptyFamily as exc:
            log.warning("%s", exc)
            skipped += 1
    write_rows(args.output, [pair.to_dict() for pair in built])
    counts = count_by_gap(built)
    print(f"families: {len(families)} ({skipped} without constructible pairs)")
    print(f"pairs: {len(built)} " + ", ".join(f"{gap} {n}" for gap, n in counts.items()))
    print(json.dumps(
        {"families": len(families), "skipped": skipped, "pairs": len(built), "by_gap": counts},
        sort_keys=True,
    ))
    return EXIT_OK


def cmd_loss_eval(args: argparse.Namespace) -> int:
    if args.schedule:
        schedule = load_schedule(args.schedule)
    else:
        schedule = load_config(args.config).schedule
    pair_rows = list(read_rows(args.pairs))
    logprob_rows = list(read_rows(args.logprobs))
    joined = join_quads(pair_rows, logprob_rows)
    report = cogpo_loss([(quad, gap) for _, quad, gap in joined], schedule)

    margin_sums: dict[str, list[float]] = {}
    out_rows = []
    for (pair_id, _quad, gap), m in zip(joined, report.margins):
        margin_sums.setdefault(gap.value, []).append(m)
        out_rows.append(
            {
                "id": pair_id,
                "gap": gap.value,
                "beta": assign_beta(gap, schedule),
                "margin": m,
                "loss_term": float(np.logaddexp(0.0, -m)),
            }
        )
    if args.output:
        write_rows(args.output, out_rows)
    mean_by_gap = {
        gap: sum(values) / len(values) for gap, values in sorted(margin_sums.items())
    }
    for gap, mean in mean_by_gap.items():
        print(f"mean margin ({gap}): {mean:.6f}")
    print(f"loss: {report.loss:.12f} over {len(joined)} pairs")
    print(json.dumps(
        {"loss": report.loss, "count": len(joined), "mean_margin_by_gap": mean_by_gap},
        sort_keys=True,
    ))
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    checks: list[tuple[str, bool, str]] = []
    schedule = BetaSchedule()

    rng = np.random.default_rng(7)
    policy = ToyPolicy(vocab_size=3, n_buckets=2, rng=rng)
    reference = ToyPolicy(vocab_size=3, n_buckets=2, rng=rng)
    batch = [
        TokenPair(prompt=(0, 1), chosen=(1, 2, 0), rejected=(2,), gap=GapType.SMALL),
        TokenPair(prompt=(2,), chosen=(0, 0), rejected=(1, 2), gap=GapType.MEDIUM),
        TokenPair(prompt=(1,), chosen=(2, 1), rejected=(0,), gap=GapType.LARGE),
        TokenPair(prompt=(0,), chosen=(1,), rejected=(2, 2), gap=GapType.LARGE),
    ]
    fault = (0, 1) if args.inject_gradient_fault else None
    gradient = grad_check(batch, schedule, policy, reference, corruption=fault)
    checks.append(
        ("gradient-check", gradient.passed, f"max rel err {gradient.max_rel_error:.2e}")
    )
    control = grad_check(batch, schedule, policy, reference, corruption=(1, 2))
    checks.append(
        ("negative-control", not control.passed, f"corrupted coordinate flagged at {control.worst_coordinate}")
    )

    degenerate = BetaSchedule(beta_small=0.3, beta_medium=0.3, beta_large=0.3)
    gaps = list(GapType)
    worst = 0.0
    for _ in range(200):
        quads = [
            LogProbQuad(*(rng.normal(-3.0, 2.0) for _ in range(4))) for _ in range(8)
        ]
        tagged = [(quad, gaps[int(rng.integers(3))]) for quad in quads]
        diff = abs(cogpo_loss(tagged, degenerate).loss - dpo_loss(quads, 0.3).loss)
        worst = max(worst, diff)
    checks.append(("reduction", worst < 1e-12, f"max deviation {worst:.2e}"))

    extremes = [-1e4, -100.0, 0.0, 100.0, 1e4]
    stable = all(
        math.isfinite(dpo_loss([LogProbQuad(m, 0.0, 0.0, 0.0)], 1.0).loss) for m in extremes
    )
    checks.append(("stability", stable, "margins swept over [-1e4, 1e4]"))

    try:
        templates = load_templates()
        conforming = True
        for name in TEMPLATE_NAMES:
            golden = load_golden_fixture(name)
            system, user = templates[name].render(**GOLDEN_INPUTS)
            if system != golden["system"] or user != golden["user"]:
                conforming = False
        checks.append(("prompt-golden", conforming, "rendered prompts vs golden fixtures"))
    except (OSError, KeyError, ValueError) as exc:
        checks.append(("prompt-golden", False, f"fixture load failed: {exc}"))

    width = max(len(name) for name, _ok, _note in checks) + 2
    for name, ok, note in checks:
        print(f"{name.ljust(width)}{'PASS' if ok else 'FAIL'}  {note}")
    return EXIT_OK if all(ok for _name, ok, _note in checks) else EXIT_FATAL
