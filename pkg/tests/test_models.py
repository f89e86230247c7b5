"""Tests for run configuration, user config, reports and report storage."""

import json
from pathlib import Path

import click
import pytest

from refine_cli.api.models import (
    AUDIT_NAMES, OutputFormat, ParseReport, RunConfig, Scheduler, Status, TraceListing, parse_audits,
)
from refine_cli.utils.config import config_defaults, env_overrides, fixtures_dir, load_user_config
from refine_cli.utils.storage import ReportStorage

from conftest import FIXTURES, fixture


class TestParseAudits:
    def test_all_and_none(self):
        assert parse_audits("all") == AUDIT_NAMES
        assert parse_audits("none") == ()

    def test_list_keeps_canonical_order(self):
        assert parse_audits("safety, refsucc") == ("refsucc", "safety")

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown audit"):
            parse_audits("refsucc,liveness")


class TestRunConfig:
    def test_defaults(self):
        config = RunConfig.from_sources({})
        assert (config.int_lo, config.int_hi) == (-4, 8)
        assert config.workers == 1
        assert config.output_format == OutputFormat.TEXT

    def test_flags_beat_environment_beat_config_file(self):
        user = {"defaults": {"workers": 2, "state_cap": 10, "max_steps": 5}}
        env = {"workers": "4", "state_cap": "20"}
        flags = {"workers": 8, "state_cap": None}
        config = RunConfig.from_sources(flags, env, user)
        assert config.workers == 8
        assert config.state_cap == 20
        assert config.max_steps == 5

    def test_int_range_and_format(self):
        config = RunConfig.from_sources({"int_range": "-2..8", "format": "JSON", "scheduler": "random"})
        assert (config.int_lo, config.int_hi) == (-2, 8)
        assert config.output_format == OutputFormat.JSON
        assert config.scheduler == Scheduler.RANDOM

    def test_audits_from_yaml_list(self):
        config = RunConfig.from_sources({}, user_config={"defaults": {"audits": ["safety", "erasure"]}})
        assert config.audits == ("safety", "erasure")

    @pytest.mark.parametrize("flags", [
        {"int_range": "8..-2"},
        {"workers": 0},
        {"max_steps": "many"},
        {"addr_count": -1},
        {"format": "xml"},
        {"audits": "bogus"},
    ])
    def test_bad_values(self, flags):
        with pytest.raises(click.BadParameter):
            RunConfig.from_sources(flags)

    def test_input_paths(self, tmp_path):
        config = RunConfig.from_sources({"program": str(fixture("echo_loop.rimp"))})
        assert config.program == fixture("echo_loop.rimp")
        with pytest.raises(click.BadParameter):
            RunConfig.from_sources({"program": str(tmp_path / "missing.rimp")})

    def test_bare_name_resolves_in_fixtures_dir(self):
        user = {"paths": {"fixtures": str(FIXTURES)}}
        config = RunConfig.from_sources({"ats": "counter.rats"}, user_config=user)
        assert config.ats == FIXTURES / "counter.rats"

    def test_incompleteness_names_the_bounds(self):
        data = RunConfig(int_lo=-2, int_hi=8, max_steps=40).incompleteness()
        assert data["bounded"] is True
        assert data["domains"]["int_range"] == [-2, 8]
        assert data["max_steps"] == 40


class TestUserConfig:
    def test_missing_file(self, tmp_path):
        assert load_user_config(tmp_path / "config.yaml") == {}

    def test_reads_yaml(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("defaults:\n  workers: 3\npaths:\n  reports: ./out\n  fixtures: ./fx\n")
        user = load_user_config(path)
        assert config_defaults(user) == {"workers": 3, "report_dir": "./out"}
        assert fixtures_dir(user) == Path("./fx")

    def test_bad_yaml_is_ignored(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("defaults: [unclosed\n")
        assert load_user_config(path) == {}

    def test_non_mapping_is_ignored(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("- just\n- a list\n")
        assert load_user_config(path) == {}

    def test_env_overrides(self):
        environ = {"REFINE_WORKERS": "6", "REFINE_STATE_CAP": "", "REFINE_REPORT_DIR": "/tmp/r", "HOME": "/root"}
        assert env_overrides(environ) == {"workers": "6", "report_dir": "/tmp/r"}


class TestReports:
    def test_envelope(self):
        report = TraceListing("enumerate-ats", Status.PASS, RunConfig(), max_len=2, traces=[[], [[]]])
        data = report.to_dict()
        assert data["schema"] == "refine-report"
        assert data["version"] == 1
        assert data["verdict"] == "pass"
        assert data["count"] == 2
        assert "wall_time" not in data
        assert "incompleteness" in data

    def test_timings_add_wall_time(self):
        report = ParseReport("parse", Status.PASS, RunConfig(timings=True), wall_time=1.23456)
        assert report.to_dict()["wall_time"] == 1.235

    def test_exit_codes(self):
        assert [s.exit_code for s in Status] == [0, 1, 2]


class TestReportStorage:
    def test_save_writes_dated_report_and_history(self, tmp_path):
        storage = ReportStorage(tmp_path)
        config = RunConfig(program=fixture("echo_loop.rimp"))
        path = storage.save(ParseReport("check-refinement", Status.FAIL, config))
        assert path.exists()
        assert path.relative_to(tmp_path / "reports").parts[0].isdigit()
        assert "check_refinement" in path.name
        assert json.loads(path.read_text())["verdict"] == "fail"
        [entry] = storage.history()
        assert entry["command"] == "check-refinement"
        assert entry["program"].endswith("echo_loop.rimp")

    def test_history_accumulates(self, tmp_path):
        storage = ReportStorage(tmp_path)
        for _ in range(3):
            storage.save(ParseReport("parse", Status.PASS, RunConfig()))
        assert len(storage.history()) == 3

    def test_corrupt_history_starts_over(self, tmp_path):
        storage = ReportStorage(tmp_path)
        storage.history_file.write_text("{broken")
        assert storage.history() == []
