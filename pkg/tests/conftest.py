import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fairaudit.dataset import AttributeSpec, Dataset, DatasetSchema
from fairaudit.subgroups import SubgroupKey


def make_dataset(rows, features=None, prediction=True):
    """rows: list of (race, sex, label[, prediction])."""
    schema = DatasetSchema(
        protected=(AttributeSpec("race", categories=("a", "b")), AttributeSpec("sex", categories=("x", "y"))),
        label_column="label",
        prediction_column="pred" if prediction else None,
        feature_columns=tuple(features or ()),
    )
    attrs = {"race": [r[0] for r in rows], "sex": [r[1] for r in rows]}
    labels = [r[2] for r in rows]
    preds = [r[3] for r in rows] if prediction else None
    return Dataset(schema, attrs, labels, preds, features or {})


@pytest.fixture
def toy():
    # (b, y) never occurs; (a, x) has two records
    rows = [
        ("a", "x", "1", "1"),
        ("a", "x", "0", "1"),
        ("a", "y", "1", "1"),
        ("b", "x", "1", "0"),
        ("b", "x", "0", "0"),
        ("a", "y", "0", "0"),
    ]
    return make_dataset(rows)


def key(**kw):
    return SubgroupKey(tuple(kw.items()))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
