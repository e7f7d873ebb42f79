"""Schema-validated ingestion of audit tables.

A :class:`Dataset` is an immutable, column-oriented table: one string array
per protected attribute (already binned), a label array, an optional
prediction array, and raw feature columns. ``Dataset.records`` gives the
row-oriented view when that is more convenient.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyDataset,
    MissingColumn,
    SchemaError,
    UnparseableValue,
    ValidationError,
    ValueOutOfRange,
)

CATEGORICAL = "categorical"
NUMERIC_AGE = "numeric-age"
DECADES = "decades-with-merge"
EXPLICIT = "explicit-ranges"


@dataclass(frozen=True)
class AgeBinRule:
    """How a numeric age column becomes categories.

    ``ranges`` is only used in explicit mode. Each entry is ``(lo, hi)`` or
    ``(lo, hi, label)``; both ends are inclusive and the default label is
    ``"lo-hi"``.
    """

    mode: str = DECADES
    min_count: int = 5
    ranges: tuple = ()

    def __post_init__(self):
        if self.mode not in (DECADES, EXPLICIT):
            raise SchemaError(f"unknown age binning mode {self.mode!r}")
        if int(self.min_count) < 1:
            raise SchemaError("min_count must be >= 1")
        if self.mode == EXPLICIT:
            if not self.ranges:
                raise SchemaError("explicit-ranges mode needs at least one range")
            spans = sorted((int(r[0]), int(r[1])) for r in self.ranges)
            for lo, hi in spans:
                if lo > hi:
                    raise SchemaError(f"range [{lo}, {hi}] is empty")
            for (_, hi), (lo, _) in zip(spans, spans[1:]):
                if lo <= hi:
                    raise SchemaError("explicit age ranges overlap")

    def labelled_ranges(self) -> list[tuple[int, int, str]]:
        out = []
        for r in self.ranges:
            lo, hi = int(r[0]), int(r[1])
            label = str(r[2]) if len(r) > 2 else f"{lo}-{hi}"
            out.append((lo, hi, label))
        return out


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str = CATEGORICAL
    categories: tuple[str, ...] = ()
    binning: AgeBinRule | None = None

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(str(c).strip() for c in self.categories))
        if self.kind == CATEGORICAL:
            if self.binning is not None:
                raise SchemaError(f"{self.name}: categorical attribute cannot have binning")
            if not self.categories:
                raise SchemaError(f"{self.name}: categorical attribute needs categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"{self.name}: duplicate categories")
        elif self.kind == NUMERIC_AGE:
            if self.categories:
                raise SchemaError(f"{self.name}: numeric-age attribute cannot list categories")
            if self.binning is None:
                object.__setattr__(self, "binning", AgeBinRule())
        else:
            raise SchemaError(f"{self.name}: unknown attribute kind {self.kind!r}")


@dataclass(frozen=True)
class DatasetSchema:
    protected: tuple[AttributeSpec, ...]
    label_column: str
    prediction_column: str | None = None
    feature_columns: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "protected", tuple(self.protected))
        object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        names = self.columns
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")

    @property
    def protected_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.protected)

    @property
    def columns(self) -> list[str]:
        cols = list(self.protected_names) + [self.label_column]
        if self.prediction_column is not None:
            cols.append(self.prediction_column)
        return cols + list(self.feature_columns)

    def to_dict(self) -> dict:
        attrs = []
        for a in self.protected:
            d: dict = {"name": a.name, "kind": a.kind}
            if a.kind == CATEGORICAL:
                d["categories"] = list(a.categories)
            else:
                b = a.binning
                d["binning"] = {"mode": b.mode, "min_count": b.min_count}
                if b.mode == EXPLICIT:
                    d["binning"]["ranges"] = [list(r) for r in b.ranges]
            attrs.append(d)
        return {
            "protected": attrs,
            "label_column": self.label_column,
            "prediction_column": self.prediction_column,
            "feature_columns": list(self.feature_columns),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DatasetSchema":
        try:
            attrs = []
            for a in d["protected"]:
                binning = None
                if "binning" in a and a["binning"] is not None:
                    b = a["binning"]
                    binning = AgeBinRule(
                        mode=b.get("mode", DECADES),
                        min_count=int(b.get("min_count", 5)),
                        ranges=tuple(tuple(r) for r in b.get("ranges", ())),
                    )
                attrs.append(
                    AttributeSpec(
                        name=a["name"],
                        kind=a.get("kind", CATEGORICAL),
                        categories=tuple(a.get("categories", ())),
                        binning=binning,
                    )
                )
            return cls(
                protected=tuple(attrs),
                label_column=d["label_column"],
                prediction_column=d.get("prediction_column"),
                feature_columns=tuple(d.get("feature_columns", ())),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "DatasetSchema":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError as exc:
            raise SchemaError(f"schema file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise SchemaError(f"schema is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Record:
    attribute_values: dict
    label: str
    prediction: str | None = None
    features: dict = field(default_factory=dict)


class Dataset:
    """Immutable column store of audit records.

    Parameters
    ----------
    schema : DatasetSchema
    attributes : mapping of attribute name to sequence of category strings
        Values must already be binned (numeric ages turned into labels).
    labels : sequence of str
    predictions : sequence of str, optional
        Required iff the schema declares a prediction column.
    features : mapping of feature name to sequence, optional
    categories : mapping of attribute name to ordered categories, optional
        Defaults to the schema's categories, or sorted observed values for
        numeric-age attributes.
    """

    def __init__(
        self,
        schema: DatasetSchema,
        attributes: Mapping[str, Sequence[str]],
        labels: Sequence[str],
        predictions: Sequence[str] | None = None,
        features: Mapping[str, Sequence] | None = None,
        categories: Mapping[str, Sequence[str]] | None = None,
    ):
        self.schema = schema
        self.labels = _frozen(np.asarray(labels, dtype=str))
        n = len(self.labels)
        if n == 0:
            raise EmptyDataset("dataset has no records")
        self.n = n

        self.attributes = {}
        self.categories = {}
        for spec in schema.protected:
            if spec.name not in attributes:
                raise MissingColumn(f"missing protected attribute {spec.name!r}", column=spec.name)
            col = _frozen(np.asarray(attributes[spec.name], dtype=str))
            if len(col) != n:
                raise SchemaError(f"attribute {spec.name!r} has {len(col)} values, expected {n}")
            self.attributes[spec.name] = col
            if categories is not None and spec.name in categories:
                cats = tuple(categories[spec.name])
            elif spec.kind == CATEGORICAL:
                cats = spec.categories
            else:
                cats = tuple(sorted(set(col.tolist()), key=_age_label_sort_key))
            self.categories[spec.name] = cats

        if (predictions is None) != (schema.prediction_column is None):
            raise SchemaError("predictions must be given iff the schema declares a prediction column")
        self.predictions = None
        if predictions is not None:
            self.predictions = _frozen(np.asarray(predictions, dtype=str))
            if len(self.predictions) != n:
                raise SchemaError("prediction column length does not match labels")

        self.features = {}
        features = features or {}
        for name in schema.feature_columns:
            if name not in features:
                raise MissingColumn(f"missing feature column {name!r}", column=name)
            col = np.asarray(features[name])
            if len(col) != n:
                raise SchemaError(f"feature {name!r} has {len(col)} values, expected {n}")
            self.features[name] = _frozen(col)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, protected={list(self.schema.protected_names)})"

    @property
    def records(self) -> list[Record]:
        names = self.schema.protected_names
        out = []
        for i in range(self.n):
            out.append(
                Record(
                    attribute_values={a: str(self.attributes[a][i]) for a in names},
                    label=str(self.labels[i]),
                    prediction=None if self.predictions is None else str(self.predictions[i]),
                    features={f: self.features[f][i].item() for f in self.schema.feature_columns},
                )
            )
        return out

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels.tolist())))

    def subset(self, indices: Iterable[int]) -> "Dataset":
        """Rows at ``indices`` (in that order); category lists are kept."""
        idx = np.asarray(list(indices), dtype=np.intp)
        return Dataset(
            self.schema,
            {a: col[idx] for a, col in self.attributes.items()},
            self.labels[idx],
            None if self.predictions is None else self.predictions[idx],
            {f: col[idx] for f, col in self.features.items()},
            categories=self.categories,
        )

    def with_predictions(self, predictions: Sequence[str], column: str = "prediction") -> "Dataset":
        schema = self.schema
        if schema.prediction_column is None:
            schema = DatasetSchema(schema.protected, schema.label_column, column, schema.feature_columns)
        return Dataset(schema, self.attributes, self.labels, predictions, self.features, self.categories)

    def to_csv(self, path: str | Path) -> None:
        cols = self.schema.columns
        data = dict(self.attributes)
        data[self.schema.label_column] = self.labels
        if self.predictions is not None:
            data[self.schema.prediction_column] = self.predictions
        data.update(self.features)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for i in range(self.n):
                w.writerow([data[c][i] for c in cols])


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


def _age_label_sort_key(label: str):
    head = label.split("-")[0].rstrip("s")
    try:
        return (0, int(head), label)
    except ValueError:
        return (1, 0, label)


def _decade_label(lo: int, hi: int) -> str:
    if hi == lo + 9:
        return f"{lo}s"
    return f"{lo}-{hi}"


def apply_age_binning(ages: Sequence[int], rule: AgeBinRule) -> list[str]:
    """Map integer ages to category labels.

    In decades mode every observed decade starts as its own bin. Sweeping
    from the youngest bin upward, any bin holding fewer than
    ``rule.min_count`` people is merged into the next older bin; if the
    oldest bin is still short afterwards it is merged into its younger
    neighbour. Single-decade bins are labelled ``"20s"``, merged bins
    ``"0-19"``.

    >>> apply_age_binning([5, 7, 12, 13, 15] + [25] * 40, AgeBinRule())[:2]
    ['0-19', '0-19']
    """
    ages = [int(a) for a in ages]
    if any(a < 0 for a in ages):
        raise ValueOutOfRange("ages must be non-negative")
    if rule.mode == EXPLICIT:
        table = rule.labelled_ranges()
        out = []
        for a in ages:
            for lo, hi, label in table:
                if lo <= a <= hi:
                    out.append(label)
                    break
            else:
                raise ValueOutOfRange(f"age {a} is not covered by any explicit range")
        return out

    if not ages:
        return []
    counts = Counter(a // 10 * 10 for a in ages)
    # each bin: [lo, hi, count]
    bins = [[d, d + 9, counts[d]] for d in sorted(counts)]
    i = 0
    while i < len(bins) - 1:
        if bins[i][2] < rule.min_count:
            nxt = bins.pop(i + 1)
            bins[i] = [bins[i][0], nxt[1], bins[i][2] + nxt[2]]
        else:
            i += 1
    if len(bins) > 1 and bins[-1][2] < rule.min_count:
        last = bins.pop()
        bins[-1] = [bins[-1][0], last[1], bins[-1][2] + last[2]]

    lookup = {}
    for lo, hi, _ in bins:
        label = _decade_label(lo, hi)
        for d in range(lo, hi + 1, 10):
            lookup[d] = label
    return [lookup[a // 10 * 10] for a in ages]


def _parse_age(raw: str, row: int, column: str) -> int:
    try:
        value = float(raw)
    except ValueError:
        raise UnparseableValue(f"row {row}: {column}={raw!r} is not a number", row=row, column=column) from None
    if not math.isfinite(value) or value < 0 or value != int(value):
        raise UnparseableValue(
            f"row {row}: {column}={raw!r} is not a non-negative integer age", row=row, column=column
        )
    return int(value)


def _most_frequent(values: Iterable[str]) -> str:
    counts = Counter(values)
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best)


def _is_numeric(values: Iterable[str]) -> bool:
    try:
        for v in values:
            float(v)
    except ValueError:
        return False
    return True


def load_csv(path: str | Path, schema: DatasetSchema) -> Dataset:
    """Read a UTF-8 CSV with a header row and validate it against ``schema``.

    Blank cells in protected or feature columns are imputed: most frequent
    value for categorical columns (ties go to the smallest string), lower
    median for numeric ones. Blank labels or predictions are errors. Row
    numbers in error messages are 1-based file lines, the header being 1.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError as exc:
        raise ValidationError(f"data file not found: {path}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        rows = [r for r in reader if any(cell.strip() for cell in r)]

    for col in schema.columns:
        if col not in header:
            raise MissingColumn(f"column {col!r} not found in {path.name}", column=col)
    pos = {name: header.index(name) for name in schema.columns}
    if not rows:
        raise EmptyDataset(f"{path} has a header but no records")

    def column(name: str) -> list[str]:
        j = pos[name]
        out = []
        for r_i, r in enumerate(rows):
            if len(r) != len(header):
                raise UnparseableValue(
                    f"row {r_i + 2}: expected {len(header)} fields, got {len(r)}", row=r_i + 2, column=name
                )
            out.append(r[j].strip())
        return out

    attributes = {}
    for spec in schema.protected:
        raw = column(spec.name)
        if spec.kind == CATEGORICAL:
            allowed = set(spec.categories)
            present = [v for v in raw if v]
            for r_i, v in enumerate(raw):
                if v and v not in allowed:
                    raise UnparseableValue(
                        f"row {r_i + 2}: {spec.name}={v!r} is not a declared category",
                        row=r_i + 2,
                        column=spec.name,
                    )
            if not present:
                raise UnparseableValue(f"{spec.name}: every value is blank", column=spec.name)
            fill = _most_frequent(present)
            attributes[spec.name] = [v or fill for v in raw]
        else:
            parsed = [None if not v else _parse_age(v, r_i + 2, spec.name) for r_i, v in enumerate(raw)]
            present = [a for a in parsed if a is not None]
            if not present:
                raise UnparseableValue(f"{spec.name}: every value is blank", column=spec.name)
            fill = statistics.median_low(present)
            ages = [fill if a is None else a for a in parsed]
            attributes[spec.name] = apply_age_binning(ages, spec.binning)

    labels = column(schema.label_column)
    for r_i, v in enumerate(labels):
        if not v:
            raise UnparseableValue(f"row {r_i + 2}: blank label", row=r_i + 2, column=schema.label_column)

    predictions = None
    if schema.prediction_column is not None:
        predictions = column(schema.prediction_column)
        for r_i, v in enumerate(predictions):
            if not v:
                raise UnparseableValue(
                    f"row {r_i + 2}: blank prediction", row=r_i + 2, column=schema.prediction_column
                )

    features = {}
    for name in schema.feature_columns:
        raw = column(name)
        present = [v for v in raw if v]
        if present and _is_numeric(present):
            nums = [float(v) for v in present]
            fill = statistics.median_low(nums)
            features[name] = np.array([float(v) if v else fill for v in raw], dtype=float)
        else:
            fill = _most_frequent(present) if present else ""
            features[name] = np.array([v or fill for v in raw], dtype=str)

    return Dataset(schema, attributes, labels, predictions, features)
