"""tabsynth: instruction datasets, LLM-driven generation, and evaluation for
synthetic tabular data."""

__version__ = "0.1.0"

from .table import (  # noqa: F401
    ColumnSchema,
    DataType,
    SerializationFormat,
    Table,
    TableMetadata,
    load_csv,
    serialize_rows,
)
