"""End-to-end tests of the `refine` command line."""

import json

import pytest

from refine_cli import __version__
from refine_cli.main import cli

from conftest import fixture

SMALL = ["--int-range", "-1..3", "--addr-count", "2", "--max-seq-len", "2"]


def invoke(runner, *args, **kwargs):
    return runner.invoke(cli, [str(a) for a in args], **kwargs)


def as_json(result):
    return json.loads(result.stdout)


class TestUsage:
    def test_version(self, runner):
        result = invoke(runner, "--version")
        assert result.exit_code == 0
        assert __version__ in result.output

    def test_missing_required_option(self, runner):
        assert invoke(runner, "check-refinement", "-p", fixture("echo_loop.rimp")).exit_code == 3

    def test_bad_int_range(self, runner):
        result = invoke(runner, "enumerate-ats", "-a", fixture("counter.rats"), "--int-range", "9..1")
        assert result.exit_code == 3

    def test_missing_input_file(self, runner, tmp_path):
        result = invoke(runner, "run", "-p", tmp_path / "nope.rimp")
        assert result.exit_code == 3

    def test_parse_error(self, runner, tmp_path):
        source = tmp_path / "broken.rimp"
        source.write_text("x := 1;\ny := $\n")
        result = invoke(runner, "run", "-p", source)
        assert result.exit_code == 3
        assert "Parse error" in result.stderr

    def test_missing_annotation(self, runner, tmp_path):
        source = tmp_path / "bare.rimp"
        source.write_text("pre emp;\nwhile true { skip }\n")
        result = invoke(runner, "export-derivation", "-p", source, "-o", tmp_path / "bare.rderiv")
        assert result.exit_code == 3
        assert "loop invariant" in result.stderr


class TestEnumerateAts:
    def test_counter_traces(self, runner):
        result = invoke(runner, "enumerate-ats", "-a", fixture("counter.rats"), "--max-len", "3",
                        "--int-range", "0..3", "--format", "json")
        assert result.exit_code == 0
        data = as_json(result)
        assert data["schema"] == "refine-report"
        assert data["version"] == 1
        assert data["incompleteness"]["bounded"] is True
        assert [[], [0], [0, 1]] in data["traces"]
        assert "wall_time" not in data

    def test_timings(self, runner):
        result = invoke(runner, "enumerate-ats", "-a", fixture("counter.rats"), "--max-len", "1",
                        "-f", "json", "--timings")
        assert "wall_time" in as_json(result)

    def test_text_output(self, runner):
        result = invoke(runner, "enumerate-ats", "-a", fixture("counter.rats"), "--max-len", "2", "-r", "0..1")
        assert result.exit_code == 0
        assert result.stdout.strip()


class TestParseAndRun:
    def test_parse_json(self, runner):
        result = invoke(runner, "parse", fixture("echo_loop.rimp"), fixture("counter.rats"), "-f", "json")
        assert result.exit_code == 0
        kinds = [f["kind"] for f in as_json(result)["files"]]
        assert kinds == ["program", "ats"]

    def test_run_prints(self, runner):
        result = invoke(runner, "run", "-p", fixture("echo_loop.rimp"), *SMALL, "-n", "20", "-f", "json")
        assert result.exit_code == 0
        data = as_json(result)
        assert data["outcome"] == "step-limit"
        assert data["output"][:2] == [0, 1]

    def test_random_scheduler_is_reproducible(self, runner):
        args = ["run", "-p", fixture("racy_counter.rimp"), "--scheduler", "random", "--seed", 7, "-f", "json"]
        first, second = as_json(invoke(runner, *args)), as_json(invoke(runner, *args))
        assert first["steps"] == second["steps"]
        assert first["outcome"] in ("aborted", "terminated")


class TestVerdicts:
    def test_echo_loop_refines(self, runner):
        result = invoke(runner, "check-refinement", "-p", fixture("echo_loop.rimp"), "-a", fixture("counter.rats"),
                        *SMALL, "-n", "24")
        assert result.exit_code == 0

    def test_wrong_print_is_rejected(self, runner):
        result = invoke(runner, "check-refinement", "-p", fixture("wrong_print.rimp"), "-a", fixture("counter.rats"),
                        "-r", "-2..4", "--addr-count", "2", "--max-seq-len", "2", "-n", "30", "-f", "json")
        assert result.exit_code == 1
        data = as_json(result)
        assert data["refsucc"]["obligation"] == "Next"
        assert data["refsucc"]["counterexample"]

    @pytest.mark.parametrize("program, reason", [
        ("print_before_init.rimp", "GhostLockMisuse"),
        ("next_loop.rimp", "AtomicityViolation"),
    ])
    def test_proof_rejections(self, runner, program, reason):
        result = invoke(runner, "check-proof", "-p", fixture(program), "-a", fixture("counter.rats"),
                        *SMALL, "-f", "json")
        assert result.exit_code == 1
        assert as_json(result)["result"]["reason"] == reason

    def test_race_fails_exploration(self, runner):
        result = invoke(runner, "explore", "-p", fixture("racy_counter.rimp"), "--audits", "safety", "-f", "json")
        assert result.exit_code == 1
        [audit] = as_json(result)["audits"]
        assert audit["obligation"] == "NoAbort"

    def test_output_does_not_depend_on_workers(self, runner):
        outputs = [
            invoke(runner, "explore", "-p", fixture("racy_counter.rimp"), *SMALL, "-w", workers, "-f", "json").stdout
            for workers in (1, 8)
        ]
        assert outputs[0] == outputs[1]

    def test_state_cap_from_environment(self, runner):
        result = invoke(runner, "check-refinement", "-p", fixture("echo_loop.rimp"), "-a", fixture("counter.rats"),
                        *SMALL, "-f", "json", env={"REFINE_STATE_CAP": "5"})
        assert result.exit_code == 2
        assert as_json(result)["incompleteness"]["state_cap"] == 5


class TestSavedReports:
    def test_save_report_under_env_dir(self, runner, tmp_path):
        result = invoke(runner, "explore", "-p", fixture("racy_counter.rimp"), "--audits", "safety",
                        "--save-report", env={"REFINE_REPORT_DIR": str(tmp_path)})
        assert result.exit_code == 1
        reports = list((tmp_path / "reports").rglob("*.json"))
        assert len(reports) == 1
        history = json.loads((tmp_path / "history" / "run_log.json").read_text())
        assert history[0]["verdict"] == "fail"


@pytest.mark.slow
class TestDerivationFiles:
    def test_exported_derivation_is_accepted(self, runner, tmp_path):
        target = tmp_path / "echo_loop.rderiv"
        bounds = ["-r", "-1..2", "--addr-count", "2", "--max-seq-len", "1"]
        exported = invoke(runner, "export-derivation", "-p", fixture("echo_loop.rimp"), "-a", fixture("counter.rats"),
                          *bounds, "-o", target)
        assert exported.exit_code == 0
        assert target.exists()
        checked = invoke(runner, "check-proof", "-p", fixture("echo_loop.rimp"), "-a", fixture("counter.rats"),
                         "-d", target, *bounds, "-f", "json")
        assert checked.exit_code == 0
        assert as_json(checked)["result"]["accepted"] is True
        assert as_json(checked)["source"] == "derivation"
