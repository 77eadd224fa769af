import pytest

from tabsynth.table import ColumnSchema, DataType, Table


@pytest.fixture
def small_table():
    schema = (
        ColumnSchema("a", DataType.NUMERICAL),
        ColumnSchema("b", DataType.CATEGORICAL),
    )
    return Table(schema, ((1.0, "x"), (2.0, "y")))


@pytest.fixture
def fixtures_path():
    from pathlib import Path

    return Path(__file__).parent / "data" / "fixtures"
