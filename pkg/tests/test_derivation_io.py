"""Tests for reading and writing `.rderiv` derivation files."""

import json
from fractions import Fraction

import pytest

from refine_cli.errors import DerivationFormatError
from refine_cli.lang.assertions import alpha_equal
from refine_cli.lang.derivation_io import (
    Derivation, DerivationNode, derivation_to_dict, load_derivation, loads_derivation, save_derivation,
)
from refine_cli.lang.parser import parse_assertion, parse_command

GHOSTS = ("stdOut", "count")


def sample() -> Derivation:
    inner = DerivationNode("Assign", (), parse_assertion("1 = 1"), parse_command("x := 1"), parse_assertion("x = 1"))
    frame = parse_assertion("count |->[1/3] c", GHOSTS)
    root = DerivationNode(
        rule="Frame",
        env=(("L", parse_assertion("exists v. r |-> v")),),
        pre=parse_assertion("1 = 1 ** count |->[1/3] c", GHOSTS),
        command=parse_command("x := 1"),
        post=parse_assertion("x = 1 ** count |->[1/3] c", GHOSTS),
        children=[inner],
        witnesses={"frame": frame, "rho": Fraction(2, 3), "fresh": ("o1", "o2")},
    )
    return Derivation(root, GHOSTS)


def document(**root_overrides):
    root = {"rule": "Skip", "env": [], "pre": "emp", "command": "skip", "post": "emp"}
    root.update(root_overrides)
    return {"format": "rderiv", "version": 1, "ghosts": ["stdOut"], "root": root}


class TestSaveAndLoad:
    def test_file_round_trip(self, tmp_path):
        original = sample()
        target = save_derivation(original, tmp_path / "nested" / "proof.rderiv")
        loaded = load_derivation(target)
        assert loaded.ghosts == GHOSTS
        assert loaded.root.size() == 2
        assert loaded.root.command == original.root.command
        assert alpha_equal(loaded.root.pre, original.root.pre)
        assert loaded.root.env[0][0] == "L"
        assert loaded.root.witnesses["rho"] == Fraction(2, 3)
        assert loaded.root.witnesses["fresh"] == ("o1", "o2")
        assert alpha_equal(loaded.root.witnesses["frame"], original.root.witnesses["frame"])

    def test_document_layout(self):
        data = derivation_to_dict(sample())
        assert (data["format"], data["version"]) == ("rderiv", 1)
        assert data["root"]["witnesses"]["rho"] == "2/3"
        assert data["root"]["children"][0]["rule"] == "Assign"

    def test_walk_paths(self):
        paths = [path for path, _ in sample().root.walk()]
        assert paths == ["0", "0.0"]

    def test_stdout_is_always_a_ghost(self):
        data = document()
        data["ghosts"] = ["count"]
        assert loads_derivation(json.dumps(data)).ghosts == ("stdOut", "count")


class TestMalformed:
    def test_invalid_json(self):
        with pytest.raises(DerivationFormatError, match="invalid JSON"):
            loads_derivation("{not json")

    def test_wrong_format(self):
        data = document()
        data["format"] = "proof"
        with pytest.raises(DerivationFormatError):
            loads_derivation(json.dumps(data))

    def test_unsupported_version(self):
        data = document()
        data["version"] = 2
        with pytest.raises(DerivationFormatError, match="version"):
            loads_derivation(json.dumps(data))

    def test_missing_root(self):
        data = document()
        del data["root"]
        with pytest.raises(DerivationFormatError, match="root"):
            loads_derivation(json.dumps(data))

    def test_node_missing_fields_reports_path(self):
        data = document(children=[{"rule": "Skip", "pre": "emp"}])
        with pytest.raises(DerivationFormatError) as info:
            loads_derivation(json.dumps(data))
        assert info.value.path == "0.0"

    def test_unparsable_assertion(self):
        with pytest.raises(DerivationFormatError, match="pre"):
            loads_derivation(json.dumps(document(pre="x |->")))

    def test_bad_fraction_witness(self):
        with pytest.raises(DerivationFormatError, match="fraction"):
            loads_derivation(json.dumps(document(witnesses={"rho": "two thirds"})))

    def test_bad_name_list_witness(self):
        with pytest.raises(DerivationFormatError, match="list of names"):
            loads_derivation(json.dumps(document(witnesses={"fresh": "o1"})))
