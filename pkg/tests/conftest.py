import shutil
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixture_manifest() -> Path:
    return FIXTURES / "manifest.jsonl"


@pytest.fixture
def mutable_corpus(tmp_path: Path) -> Path:
    """Copy of the fixture corpus safe to mutate; returns its manifest path."""
    shutil.copytree(FIXTURES / "corpus", tmp_path / "corpus")
    shutil.copy(FIXTURES / "manifest.jsonl", tmp_path / "manifest.jsonl")
    return tmp_path / "manifest.jsonl"
