"""Prediction sources for the subsampling experiments.

Two built-in learners (per-cell majority vote and one-vs-rest logistic
regression on one-hot features) plus a subprocess protocol for any outside
predictor. ``fit_cv`` trains one model per cross-validation fold and lets
every model predict every record.
"""

from __future__ import annotations

import csv
import hashlib
import os
import shlex
import subprocess
import tempfile
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import (
    ClassVanishedEntirely,
    MalformedPredictionFile,
    SubprocessFailure,
    TooFewRecords,
    ValidationError,
)

CELL_MAJORITY = "cell-majority"
LOGISTIC = "logistic"
EXTERNAL = "external"


@dataclass(frozen=True)
class PredictorSpec:
    kind: str = CELL_MAJORITY
    learning_rate: float = 0.1
    epochs: int = 200
    l2: float = 1e-4
    command: str | None = None

    def __post_init__(self):
        if self.kind not in (CELL_MAJORITY, LOGISTIC, EXTERNAL):
            raise ValidationError(f"unknown predictor kind {self.kind!r}")
        if self.kind == LOGISTIC and not (self.learning_rate > 0 and self.epochs > 0 and self.l2 > 0):
            raise ValidationError("logistic parameters must be positive")
        if self.kind == EXTERNAL and not self.command:
            raise ValidationError("external predictor needs a command")


@dataclass(frozen=True)
class CVConfig:
    folds: int = 3
    seed: int = 0


@dataclass
class TrainedEnsemble:
    models: list
    predictions: np.ndarray  # (folds, n) string array
    fold_of: np.ndarray


def derive_seed(master: int, *parts) -> int:
    """Stable 64-bit seed for a named sub-stream of ``master``."""
    text = "|".join([str(int(master))] + [str(p) for p in parts])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def fold_assignment(n: int, cv: CVConfig) -> np.ndarray:
    """Fold id per record; fold sizes differ by at most one."""
    if cv.folds < 2:
        raise TooFewRecords("need at least two folds")
    if cv.folds > n:
        raise TooFewRecords(f"{cv.folds} folds need at least {cv.folds} records, got {n}")
    rng = np.random.default_rng(derive_seed(cv.seed, "cv"))
    perm = rng.permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % cv.folds
    return fold_of


def _majority(counter: Counter) -> str:
    best = max(counter.values())
    return min(c for c, k in counter.items() if k == best)


class CellMajorityModel:
    """Predicts the majority training label of each protected-attribute cell."""

    def fit(self, data: Dataset) -> "CellMajorityModel":
        names = data.schema.protected_names
        cells: dict = {}
        for i, label in enumerate(data.labels.tolist()):
            cell = tuple(data.attributes[a][i] for a in names)
            cells.setdefault(cell, Counter())[label] += 1
        self.names = names
        self.table = {cell: _majority(cnt) for cell, cnt in cells.items()}
        self.fallback = _majority(Counter(data.labels.tolist()))
        return self

    def predict(self, data: Dataset) -> np.ndarray:
        cols = [data.attributes[a].tolist() for a in self.names]
        return np.array([self.table.get(cell, self.fallback) for cell in zip(*cols)], dtype=str)


class _OneHot:
    def fit(self, data: Dataset):
        self.cat_cols = []
        self.num_cols = []
        for a in data.schema.protected_names:
            self.cat_cols.append((("attr", a), list(data.categories[a])))
        for f in data.schema.feature_columns:
            col = data.features[f]
            if col.dtype.kind in "fiub":
                vals = col.astype(float)
                sd = vals.std()
                self.num_cols.append((f, vals.mean(), sd if sd > 0 else 1.0))
            else:
                self.cat_cols.append((("feat", f), sorted(set(col.tolist()))))
        return self

    def transform(self, data: Dataset) -> np.ndarray:
        blocks = [np.ones((data.n, 1))]
        for (src, name), cats in self.cat_cols:
            col = data.attributes[name] if src == "attr" else data.features[name]
            blocks.append((col[:, None] == np.asarray(cats, dtype=str)[None, :]).astype(float))
        for f, mu, sd in self.num_cols:
            blocks.append(((data.features[f].astype(float) - mu) / sd)[:, None])
        return np.hstack(blocks)


class LogisticModel:
    """One-vs-rest logistic regression trained by full-batch gradient descent."""

    def __init__(self, learning_rate: float = 0.1, epochs: int = 200, l2: float = 1e-4):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2

    def fit(self, data: Dataset) -> "LogisticModel":
        self.encoder = _OneHot().fit(data)
        X = self.encoder.transform(data)
        self.classes = sorted(set(data.labels.tolist()))
        if len(self.classes) == 1:
            self.W = None
            return self
        n, d = X.shape
        Y = (data.labels[:, None] == np.asarray(self.classes, dtype=str)[None, :]).astype(float)
        W = np.zeros((d, len(self.classes)))
        reg = np.full((d, 1), self.l2)
        reg[0] = 0.0  # bias is not penalised
        for _ in range(self.epochs):
            P = 1.0 / (1.0 + np.exp(-np.clip(X @ W, -500, 500)))
            grad = X.T @ (P - Y) / n + reg * W
            W -= self.learning_rate * grad
        self.W = W
        return self

    def predict(self, data: Dataset) -> np.ndarray:
        if self.W is None:
            return np.full(data.n, self.classes[0], dtype=object).astype(str)
        scores = self.encoder.transform(data) @ self.W
        return np.asarray(self.classes, dtype=str)[np.argmax(scores, axis=1)]


# --- external predictors -------------------------------------------------------


def write_protocol_csv(data: Dataset, path: str | Path, include_label: bool) -> None:
    """Columns: protected attributes, then features (schema order), then label."""
    cols = list(data.schema.protected_names) + list(data.schema.feature_columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols + ([data.schema.label_column] if include_label else []))
        for i in range(data.n):
            row = [data.attributes[a][i] for a in data.schema.protected_names]
            row += [data.features[f][i] for f in data.schema.feature_columns]
            if include_label:
                row.append(data.labels[i])
            w.writerow(row)


def _count_rows(path: Path) -> int:
    with open(path, newline="", encoding="utf-8") as fh:
        return max(sum(1 for _ in csv.reader(fh)) - 1, 0)


def external_predict(command: str, train_csv: str | Path, test_csv: str | Path, out_csv: str | Path | None = None) -> np.ndarray:
    """Run an outside predictor and read back its predictions.

    If ``command`` contains ``{train}``, ``{test}`` or ``{out}`` placeholders
    they are filled in; otherwise ``--train T --test S --out O`` is appended.
    The output must be a CSV with a single ``prediction`` column and one row
    per test record, in order.
    """
    train_csv, test_csv = Path(train_csv), Path(test_csv)
    cleanup = None
    if out_csv is None:
        cleanup = tempfile.TemporaryDirectory(prefix="fairaudit-ext-")
        out_csv = Path(cleanup.name) / "predictions.csv"
    out_csv = Path(out_csv)
    try:
        if any(t in command for t in ("{train}", "{test}", "{out}")):
            argv = [part.format(train=train_csv, test=test_csv, out=out_csv) for part in shlex.split(command)]
        else:
            argv = shlex.split(command) + ["--train", str(train_csv), "--test", str(test_csv), "--out", str(out_csv)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True)
        except OSError as exc:
            raise SubprocessFailure(f"could not start {argv[0]!r}: {exc}", None) from exc
        if proc.returncode != 0:
            raise SubprocessFailure(
                f"predictor exited with code {proc.returncode}: {proc.stderr.strip()[:500]}", proc.returncode
            )
        expected = _count_rows(test_csv)
        try:
            with open(out_csv, newline="", encoding="utf-8") as fh:
                rows = list(csv.reader(fh))
        except FileNotFoundError:
            raise MalformedPredictionFile("predictor wrote no output file", row=0) from None
        if not rows or [h.strip() for h in rows[0]] != ["prediction"]:
            raise MalformedPredictionFile("header must be exactly 'prediction'", row=1)
        preds = []
        for r_i, row in enumerate(rows[1:], start=2):
            if len(row) != 1 or not row[0].strip():
                raise MalformedPredictionFile(f"row {r_i} is not a single prediction", row=r_i)
            preds.append(row[0].strip())
        if len(preds) != expected:
            raise MalformedPredictionFile(
                f"expected {expected} predictions, got {len(preds)}", row=len(rows)
            )
        return np.asarray(preds, dtype=str)
    finally:
        if cleanup is not None:
            cleanup.cleanup()


class ExternalModel:
    def __init__(self, command: str):
        self.command = command
        self.train = None

    def fit(self, data: Dataset) -> "ExternalModel":
        self.train = data
        return self

    def predict(self, data: Dataset) -> np.ndarray:
        with tempfile.TemporaryDirectory(prefix="fairaudit-ext-") as tmp:
            train_csv, test_csv = Path(tmp) / "train.csv", Path(tmp) / "test.csv"
            write_protocol_csv(self.train, train_csv, include_label=True)
            write_protocol_csv(data, test_csv, include_label=False)
            return external_predict(self.command, train_csv, test_csv, Path(tmp) / "out.csv")


def make_model(spec: PredictorSpec):
    if spec.kind == CELL_MAJORITY:
        return CellMajorityModel()
    if spec.kind == LOGISTIC:
        return LogisticModel(spec.learning_rate, spec.epochs, spec.l2)
    return ExternalModel(spec.command)


# --- cross-validation ------------------------------------------------------------


def fit_cv(dataset: Dataset, spec: PredictorSpec, cv: CVConfig | None = None) -> TrainedEnsemble:
    """Train one model per fold; each model then predicts the whole dataset."""
    cv = cv or CVConfig()
    fold_of = fold_assignment(dataset.n, cv)
    models, preds = [], []
    for k in range(cv.folds):
        train_idx = np.flatnonzero(fold_of != k)
        model = make_model(spec).fit(dataset.subset(train_idx))
        models.append(model)
        preds.append(model.predict(dataset))
    return TrainedEnsemble(models, np.vstack(preds), fold_of)


def ensure_label_coverage(
    train_indices: Sequence[int],
    dataset: Dataset,
    removed_indices: Sequence[int],
    restore_all: bool = False,
) -> np.ndarray:
    """Put back removed records so every label class of ``dataset`` is trained on.

    For each class missing from ``train_indices`` the lowest-index removed
    record of that class is re-added, or every removed record of that class
    when ``restore_all`` is set. Returns sorted indices.
    """
    train = np.asarray(sorted(set(int(i) for i in train_indices)), dtype=np.intp)
    removed = np.asarray(sorted(set(int(i) for i in removed_indices)), dtype=np.intp)
    present = set(dataset.labels[train].tolist())
    extra = []
    for cls in dataset.classes:
        if cls in present:
            continue
        pool = removed[dataset.labels[removed] == cls] if len(removed) else removed
        if len(pool) == 0:
            raise ClassVanishedEntirely(f"class {cls!r} is absent from both training and removed records")
        extra.extend(pool.tolist() if restore_all else [int(pool[0])])
    if not extra:
        return train
    return np.asarray(sorted(set(train.tolist()) | set(extra)), dtype=np.intp)


def thread_count() -> int:
    """Worker threads from ``FAIRAUDIT_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("FAIRAUDIT_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"FAIRAUDIT_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValidationError("FAIRAUDIT_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)
