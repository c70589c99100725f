"""End-to-end command-line tests driven through the real entrypoint."""

from __future__ import annotations

import json
import math

import pytest
import yaml

from cogforge.cli import EXIT_FATAL, EXIT_OK, EXIT_PARTIAL, entrypoint
from cogforge.jsonl import dump_row, read_rows

LN2 = 0.6931471805599453


def write_jsonl(path, rows) -> str:
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(dump_row(row) + "\n")
    return str(path)


def write_script(path, script: dict[str, list[str]]) -> str:
    return write_jsonl(path, [{"key": k, "responses": v} for k, v in script.items()])


def dataset_rows(records) -> list[dict]:
    return [
        {"id": r.id, "problem": r.problem, "answer": r.answer, "reasoning": r.reasoning}
        for r in records
    ]


def last_json_line(capsys) -> dict:
    out = capsys.readouterr().out
    return json.loads(out.strip().splitlines()[-1])


@pytest.fixture
def curate_paths(tmp_path, six_record_dataset, six_record_script):
    input_path = write_jsonl(tmp_path / "input.jsonl", dataset_rows(six_record_dataset))
    script_path = write_script(tmp_path / "script.jsonl", six_record_script)
    return {
        "input": input_path,
        "script": script_path,
        "output": str(tmp_path / "curated.jsonl"),
        "tmp": tmp_path,
    }


class TestCurate:
    def test_six_record_run(self, curate_paths, capsys):
        code = entrypoint([
            "curate",
            "--input", curate_paths["input"],
            "--output", curate_paths["output"],
            "--mock-script", curate_paths["script"],
        ])
        assert code == EXIT_PARTIAL

        curated = list(read_rows(curate_paths["output"]))
        assert [row["id"] for row in curated] == ["r1", "r3", "r5"]
        assert [row["source"] for row in curated] == ["original", "rewritten", "rewritten"]
        assert all(row["verified"] for row in curated)
        assert all("rating" not in row for row in curated)

        discards = list(read_rows(str(curate_paths["tmp"] / "curated.discards.jsonl")))
        assert [row["id"] for row in discards] == ["r2", "r4", "r6"]
        families = list(read_rows(str(curate_paths["tmp"] / "curated.families.jsonl")))
        assert [row["id"] for row in families] == ["r1", "r3", "r5"]
        assert all(row["r_corrupted"] for row in families)

        stats = last_json_line(capsys)
        assert stats["intake_total"] == 6
        assert stats["final_size"] == 3
        assert stats["discarded"] == 3
        assert stats["rewritten"] == 2

    def test_explicit_sidecar_paths(self, curate_paths, capsys):
        discards_path = str(curate_paths["tmp"] / "d.jsonl")
        families_path = str(curate_paths["tmp"] / "f.jsonl")
        code = entrypoint([
            "curate",
            "--input", curate_paths["input"],
            "--output", curate_paths["output"],
            "--discards", discards_path,
            "--families", families_path,
            "--mock-script", curate_paths["script"],
        ])
        assert code == EXIT_PARTIAL
        assert len(list(read_rows(discards_path))) == 3
        assert len(list(read_rows(families_path))) == 3

    def test_empty_input_is_clean(self, tmp_path, capsys):
        input_path = write_jsonl(tmp_path / "empty.jsonl", [])
        script_path = write_script(tmp_path / "script.jsonl", {})
        code = entrypoint([
            "curate",
            "--input", input_path,
            "--output", str(tmp_path / "out.jsonl"),
            "--mock-script", script_path,
        ])
        assert code == EXIT_OK
        assert last_json_line(capsys)["intake_total"] == 0

    def test_missing_input_is_fatal(self, tmp_path, capsys):
        script_path = write_script(tmp_path / "script.jsonl", {})
        code = entrypoint([
            "curate",
            "--input", str(tmp_path / "absent.jsonl"),
            "--output", str(tmp_path / "out.jsonl"),
            "--mock-script", script_path,
        ])
        assert code == EXIT_FATAL
        assert "error:" in capsys.readouterr().err

    def test_no_backend_is_fatal(self, tmp_path, six_record_dataset, capsys):
        input_path = write_jsonl(tmp_path / "in.jsonl", dataset_rows(six_record_dataset))
        code = entrypoint([
            "curate", "--input", input_path, "--output", str(tmp_path / "out.jsonl"),
        ])
        assert code == EXIT_FATAL
        assert "endpoints" in capsys.readouterr().err

    def test_malformed_input_row_is_fatal(self, tmp_path, capsys):
        input_path = write_jsonl(tmp_path / "in.jsonl", [{"id": "r1", "problem": "p"}])
        script_path = write_script(tmp_path / "script.jsonl", {})
        code = entrypoint([
            "curate",
            "--input", input_path,
            "--output", str(tmp_path / "out.jsonl"),
            "--mock-script", script_path,
        ])
        assert code == EXIT_FATAL
        assert "missing field" in capsys.readouterr().err


class TestCurateResume:
    def run_baseline(self, curate_paths) -> dict[str, bytes]:
        tmp = curate_paths["tmp"]
        out = str(tmp / "baseline.jsonl")
        code = entrypoint([
            "curate",
            "--input", curate_paths["input"],
            "--output", out,
            "--mock-script", curate_paths["script"],
        ])
        assert code == EXIT_PARTIAL
        return {
            "curated": (tmp / "baseline.jsonl").read_bytes(),
            "discards": (tmp / "baseline.discards.jsonl").read_bytes(),
            "families": (tmp / "baseline.families.jsonl").read_bytes(),
        }

    def test_interrupt_then_resume_is_byte_identical(
        self, curate_paths, six_record_script, tmp_path, capsys
    ):
        baseline = self.run_baseline(curate_paths)

        config_path = tmp_path / "serial.yaml"
        config_path.write_text(
            yaml.safe_dump({"pipeline": {"max_concurrency": 1}}), encoding="utf-8"
        )
        partial = {
            key: responses
            for key, responses in six_record_script.items()
            if key.endswith((":r1", ":r2", ":r3"))
        }
        partial_path = write_script(tmp_path / "partial.jsonl", partial)
        checkpoint_path = str(tmp_path / "run.checkpoint.json")
        out = str(curate_paths["tmp"] / "resumed.jsonl")

        code = entrypoint([
            "--config", str(config_path),
            "curate",
            "--input", curate_paths["input"],
            "--output", out,
            "--checkpoint", checkpoint_path,
            "--mock-script", partial_path,
        ])
        assert code == EXIT_FATAL
        with open(checkpoint_path, encoding="utf-8") as handle:
            saved = json.load(handle)
        assert set(saved["completed"]) == {"r1", "r2", "r3"}

        code = entrypoint([
            "--config", str(config_path),
            "curate",
            "--input", curate_paths["input"],
            "--output", out,
            "--checkpoint", checkpoint_path,
            "--mock-script", curate_paths["script"],
        ])
        assert code == EXIT_PARTIAL
        tmp = curate_paths["tmp"]
        assert (tmp / "resumed.jsonl").read_bytes() == baseline["curated"]
        assert (tmp / "resumed.discards.jsonl").read_bytes() == baseline["discards"]
        assert (tmp / "resumed.families.jsonl").read_bytes() == baseline["families"]


def family_rows() -> list[dict]:
    return [
        {
            "id": "fam-easy", "problem": "p1", "answer": "a1",
            "original_rating": "easy", "r_original": "short trace",
            "r_rewritten": "expanded trace", "r_corrupted": "wrong trace",
        },
        {
            "id": "fam-medium", "problem": "p2", "answer": "a2",
            "original_rating": "medium", "r_original": "medium trace",
            "r_rewritten": None, "r_corrupted": "broken trace",
        },
    ]


class TestPairs:
    def test_standard_two_family_fixture(self, tmp_path, capsys):
        families_path = write_jsonl(tmp_path / "families.jsonl", family_rows())
        output_path = str(tmp_path / "pairs.jsonl")
        code = entrypoint(["pairs", "--families", families_path, "--output", output_path])
        assert code == EXIT_OK

        rows = list(read_rows(output_path))
        assert len(rows) == 4
        by_gap: dict[str, int] = {}
        for row in rows:
            by_gap[row["gap"]] = by_gap.get(row["gap"], 0) + 1
        assert by_gap == {"small": 1, "medium": 1, "large": 2}
        assert {row["id"] for row in rows} == {
            "fam-easy:small", "fam-easy:medium", "fam-easy:large", "fam-medium:large",
        }
        betas = {row["gap"]: row["beta"] for row in rows}
        assert betas == {"small": 0.1, "medium": 0.2, "large": 0.5}

        summary = last_json_line(capsys)
        assert summary == {
            "by_gap": {"large": 2, "medium": 1, "small": 1},
            "families": 2, "pairs": 4, "skipped": 0,
        }

    def test_family_without_members_is_skipped(self, tmp_path, capsys):
        rows = [{
            "id": "lonely", "problem": "p", "answer": "a",
            "original_rating": "medium", "r_original": "only trace",
            "r_rewritten": None, "r_corrupted": None,
        }]
        families_path = write_jsonl(tmp_path / "families.jsonl", rows)
        output_path = str(tmp_path / "pairs.jsonl")
        code = entrypoint(["pairs", "--families", families_path, "--output", output_path])
        assert code == EXIT_OK
        assert list(read_rows(output_path)) == []
        summary = last_json_line(capsys)
        assert summary["skipped"] == 1
        assert summary["pairs"] == 0

    def test_schedule_from_config(self, tmp_path, capsys):
        config_path = tmp_path / "config.yaml"
        config_path.write_text(
            yaml.safe_dump({"schedule": {"beta_small": 0.2, "beta_medium": 0.4, "beta_large": 0.8}}),
            encoding="utf-8",
        )
        families_path = write_jsonl(tmp_path / "families.jsonl", family_rows())
        output_path = str(tmp_path / "pairs.jsonl")
        code = entrypoint([
            "--config", str(config_path), "pairs",
            "--families", families_path, "--output", output_path,
        ])
        assert code == EXIT_OK
        betas = {row["gap"]: row["beta"] for row in read_rows(output_path)}
        assert betas == {"small": 0.2, "medium": 0.4, "large": 0.8}


def pair_row(pair_id: str, gap: str) -> dict:
    return {
        "id": pair_id, "prompt": "p", "chosen": f"c-{pair_id}",
        "rejected": f"r-{pair_id}", "gap": gap, "beta": 0.0,
    }


def logprob_row(pair_id: str, diff: float = 0.0) -> dict:
    return {
        "id": pair_id, "lp_w_theta": diff, "lp_w_ref": 0.0,
        "lp_l_theta": 0.0, "lp_l_ref": 0.0,
    }


class TestLossEval:
    def test_zero_margins_give_ln2(self, tmp_path, capsys):
        pairs_path = write_jsonl(
            tmp_path / "pairs.jsonl",
            [pair_row("a", "small"), pair_row("b", "large")],
        )
        logprobs_path = write_jsonl(
            tmp_path / "lp.jsonl", [logprob_row("a"), logprob_row("b")]
        )
        code = entrypoint(["loss-eval", "--pairs", pairs_path, "--logprobs", logprobs_path])
        assert code == EXIT_OK
        summary = last_json_line(capsys)
        assert abs(summary["loss"] - LN2) < 1e-12
        assert summary["count"] == 2
        assert summary["mean_margin_by_gap"] == {"large": 0.0, "small": 0.0}

    def test_mixed_gap_fixture_value(self, tmp_path, capsys):
        pairs_path = write_jsonl(
            tmp_path / "pairs.jsonl",
            [pair_row("a", "small"), pair_row("b", "medium"), pair_row("c", "large")],
        )
        logprobs_path = write_jsonl(
            tmp_path / "lp.jsonl",
            [logprob_row("a", 5.0), logprob_row("b", 5.0), logprob_row("c", 5.0)],
        )
        report_path = str(tmp_path / "report.jsonl")
        code = entrypoint([
            "loss-eval", "--pairs", pairs_path, "--logprobs", logprobs_path,
            "--output", report_path,
        ])
        assert code == EXIT_OK
        summary = last_json_line(capsys)
        assert abs(summary["loss"] - 0.28874280199695973) < 1e-12
        assert summary["mean_margin_by_gap"]["small"] == pytest.approx(0.5, abs=1e-12)
        assert summary["mean_margin_by_gap"]["large"] == pytest.approx(2.5, abs=1e-12)

        rows = list(read_rows(report_path))
        assert [row["id"] for row in rows] == ["a", "b", "c"]
        assert rows[0]["beta"] == 0.1
        assert abs(rows[1]["loss_term"] - math.log1p(math.exp(-1.0))) < 1e-12

    def test_schedule_override(self, tmp_path, capsys):
        schedule_path = tmp_path / "sched.yaml"
        schedule_path.write_text(
            yaml.safe_dump({"beta_small": 0.3, "beta_medium": 0.4, "beta_large": 0.9}),
            encoding="utf-8",
        )
        pairs_path = write_jsonl(tmp_path / "pairs.jsonl", [pair_row("a", "small")])
        logprobs_path = write_jsonl(tmp_path / "lp.jsonl", [logprob_row("a", 1.0)])
        code = entrypoint([
            "loss-eval", "--pairs", pairs_path, "--logprobs", logprobs_path,
            "--schedule", str(schedule_path),
        ])
        assert code == EXIT_OK
        summary = last_json_line(capsys)
        assert abs(summary["mean_margin_by_gap"]["small"] - 0.3) < 1e-12

    def test_join_mismatch_is_fatal(self, tmp_path, capsys):
        pairs_path = write_jsonl(
            tmp_path / "pairs.jsonl", [pair_row("a", "small"), pair_row("b", "large")]
        )
        logprobs_path = write_jsonl(tmp_path / "lp.jsonl", [logprob_row("a")])
        code = entrypoint(["loss-eval", "--pairs", pairs_path, "--logprobs", logprobs_path])
        assert code == EXIT_FATAL
        assert "error:" in capsys.readouterr().err


class TestSelftest:
    def test_clean_run_passes(self, capsys):
        code = entrypoint(["selftest"])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert "FAIL" not in out
        for name in ("gradient-check", "negative-control", "reduction", "stability", "prompt-golden"):
            assert name in out

    def test_injected_fault_is_caught(self, capsys):
        code = entrypoint(["selftest", "--inject-gradient-fault"])
        out = capsys.readouterr().out
        assert code == EXIT_FATAL
        assert any(line.startswith("gradient-check") and "FAIL" in line for line in out.splitlines())


class TestParser:
    def test_missing_subcommand_exits_with_usage(self, capsys):
        with pytest.raises(SystemExit):
            entrypoint([])

    def test_unknown_subcommand_rejected(self, capsys):
        with pytest.raises(SystemExit):
            entrypoint(["transmogrify"])
