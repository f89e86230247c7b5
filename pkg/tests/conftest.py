"""Shared fixtures for the refine-cli test suite."""

import random
from pathlib import Path

import pytest
from click.testing import CliRunner

from refine_cli.api.models import RunConfig
from refine_cli.lang.parser import parse_ats, parse_program
from refine_cli.semantics.ats import stutter_close
from refine_cli.semantics.domains import Domains

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fixture(name: str) -> Path:
    return FIXTURES / name


def load_program(name: str):
    path = fixture(name)
    return parse_program(path.read_text(encoding="utf-8"), str(path))


def load_ats(name: str = "counter.rats", closed: bool = True):
    path = fixture(name)
    spec = parse_ats(path.read_text(encoding="utf-8"), str(path))
    return stutter_close(spec) if closed else spec


def small_config(**overrides) -> RunConfig:
    """A RunConfig with bounds small enough for unit tests."""
    values = dict(int_lo=-1, int_hi=3, addr_count=2, max_seq_len=2, max_heap_cells=2, max_steps=24)
    values.update(overrides)
    return RunConfig(**values)


@pytest.fixture
def small_domains() -> Domains:
    return Domains(int_lo=-1, int_hi=3, addr_count=2, max_seq_len=2, max_heap_cells=2)


@pytest.fixture
def tiny_domains() -> Domains:
    """Bounds for wand and precision checks, which enumerate frame heaps."""
    return Domains(int_lo=-2, int_hi=2, addr_count=2, max_seq_len=1, max_heap_cells=2)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20261018)


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def counter_ats():
    return load_ats()
