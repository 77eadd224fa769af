from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture
def builder_fixture():
    return DATA / "train.jsonl"
