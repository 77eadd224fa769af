import numpy as np

from tabsynth.table import ColumnSchema, DataType, Table


def _schema(*cols):
    return tuple(ColumnSchema(n, d) for n, d in cols)


def make_numeric_table(n=60, seed=0):
    rng = np.random.default_rng(seed)
    schema = _schema(("u", DataType.NUMERICAL), ("v", DataType.NUMERICAL))
    rows = tuple(
        (float(round(a, 4)), float(round(2 * a + b, 4)))
        for a, b in zip(rng.normal(0, 1, n), rng.normal(0, 0.3, n))
    )
    return Table(schema, rows)


def make_categorical_table(n=60, seed=0):
    rng = np.random.default_rng(seed)
    schema = _schema(("color", DataType.CATEGORICAL), ("size", DataType.CATEGORICAL))
    colors = ["red", "green", "blue"]
    rows = []
    for _ in range(n):
        c = colors[int(rng.integers(0, 3))]
        s = "large" if (c == "red") == (rng.random() < 0.8) else "small"
        rows.append((c, s))
    return Table(schema, tuple(rows))


def make_mixed_table(n=80, seed=1):
    rng = np.random.default_rng(seed)
    schema = _schema(
        ("age", DataType.NUMERICAL),
        ("income", DataType.NUMERICAL),
        ("group", DataType.CATEGORICAL),
    )
    rows = []
    for _ in range(n):
        age = float(int(rng.integers(18, 80)))
        group = "senior" if age >= 50 else "junior"
        income = float(round(20 + age * 0.8 + rng.normal(0, 5), 2))
        rows.append((age, income, group))
    return Table(schema, tuple(rows))


def make_missing_table(n=50, seed=2):
    rng = np.random.default_rng(seed)
    schema = _schema(("x", DataType.NUMERICAL), ("label", DataType.CATEGORICAL))
    rows = []
    for _ in range(n):
        x = None if rng.random() < 0.15 else float(round(rng.normal(5, 2), 3))
        lab = None if rng.random() < 0.1 else ("yes" if rng.random() < 0.5 else "no")
        rows.append((x, lab))
    return Table(schema, tuple(rows))


def make_text_table(n=40, seed=3):
    rng = np.random.default_rng(seed)
    schema = _schema(
        ("score", DataType.NUMERICAL),
        ("comment", DataType.TEXTUAL),
    )
    words = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"]
    rows = []
    for i in range(n):
        text = " ".join(
            words[int(rng.integers(0, len(words)))] for _ in range(3)
        ) + f" #{i}"
        rows.append((float(i % 7), text))
    return Table(schema, tuple(rows))


FIXTURE_TABLE_MAKERS = {
    "numeric_only": make_numeric_table,
    "categorical_only": make_categorical_table,
    "mixed": make_mixed_table,
    "with_missing": make_missing_table,
    "with_text": make_text_table,
}
