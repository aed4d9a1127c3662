"""Feature catalog, model presets, standard scaling, and stratified folding."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .ingest import RawTable


class PreprocessError(ValueError):
    pass


class ZeroVarianceColumn(PreprocessError):
    pass


class DimensionMismatch(PreprocessError):
    pass


class TooFewClassMembers(PreprocessError):
    pass


class UnknownFeature(PreprocessError):
    pass


# The two fixed variable sets used throughout; selection was expert-driven,
# so they ship as presets rather than as a search procedure.
MODEL1_FEATURES = ("attr5", "attr24", "attr25", "attr26", "attr34")
MODEL2_FEATURES = (
    "attr8", "attr10", "attr12", "attr20", "attr33", "attr40",
    "attr42", "attr46", "attr49", "attr59", "attr63", "attr64",
)

LABEL_COLUMN = "class"


def load_catalog() -> tuple[dict, ...]:
    """The 64-ratio feature catalog: ``(id, description)`` records, in order."""
    text = resources.files("bankbayes").joinpath("catalog.json").read_text("utf-8")
    entries = tuple(json.loads(text))
    ids = [e["id"] for e in entries]
    if len(entries) != 64 or len(set(ids)) != 64:
        raise PreprocessError("feature catalog must hold 64 unique entries")
    if ids != [f"attr{k}" for k in range(1, 65)]:
        raise PreprocessError("feature catalog ids out of order")
    return entries


def describe(feature_id: str) -> str:
    for entry in load_catalog():
        if entry["id"] == feature_id:
            return entry["description"]
    raise UnknownFeature(f"{feature_id!r} is not in the feature catalog")


@dataclass(frozen=True)
class ModelSpec:
    """A named, ordered feature subset of the catalog."""

    name: str
    feature_ids: tuple[str, ...]
    preset: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "feature_ids", tuple(self.feature_ids))
        if not self.feature_ids:
            raise PreprocessError("feature_ids must be non-empty")
        if len(set(self.feature_ids)) != len(self.feature_ids):
            raise PreprocessError("feature_ids contains duplicates")
        known = {e["id"] for e in load_catalog()}
        unknown = [f for f in self.feature_ids if f not in known]
        if unknown:
            raise UnknownFeature(f"unknown feature ids: {unknown}")
        if self.preset not in ("model1", "model2", "custom"):
            raise PreprocessError(f"unknown preset {self.preset!r}")

    @property
    def parameter_names(self) -> tuple[str, ...]:
        return ("(Intercept)",) + self.feature_ids


def model_preset(name: str) -> ModelSpec:
    if name == "model1":
        return ModelSpec("model1", MODEL1_FEATURES, preset="model1")
    if name == "model2":
        return ModelSpec("model2", MODEL2_FEATURES, preset="model2")
    raise PreprocessError(f"unknown preset {name!r}; expected 'model1' or 'model2'")


@dataclass(frozen=True)
class LabeledMatrix:
    """Design matrix plus binary labels; all entries finite, y in {0,1}."""

    X: np.ndarray
    y: np.ndarray
    feature_ids: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_ids", tuple(self.feature_ids))
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DimensionMismatch(
                f"X is {X.shape}, y has length {y.shape[0] if y.ndim == 1 else '?'}"
            )
        if X.shape[1] != len(self.feature_ids):
            raise DimensionMismatch("feature_ids length does not match X columns")
        if not np.isfinite(X).all():
            raise PreprocessError("X contains non-finite entries; impute first")
        if not np.isin(y, (0.0, 1.0)).all():
            raise PreprocessError("y must contain only 0/1 labels")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


def build_matrix(
    table: RawTable, spec: ModelSpec, label_column: str = LABEL_COLUMN
) -> LabeledMatrix:
    """Select ``spec``'s feature columns plus the label column from a table."""
    missing = [c for c in (*spec.feature_ids, label_column) if c not in table.column_names]
    if missing:
        raise UnknownFeature(f"table lacks columns: {missing}")
    cols = [table.column_names.index(f) for f in spec.feature_ids]
    X = table.values[:, cols]
    y = table.column(label_column)
    return LabeledMatrix(X, y, spec.feature_ids)


@dataclass(frozen=True)
class Scaler:
    """Column-wise standardization fitted on training data only."""

    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=np.float64))
        object.__setattr__(self, "sds", np.asarray(self.sds, dtype=np.float64))
        if self.means.shape != self.sds.shape or self.means.ndim != 1:
            raise DimensionMismatch("means/sds must be 1-D and congruent")
        if not (self.sds > 0).all():
            raise ZeroVarianceColumn("scaler sds must be strictly positive")


def fit_scaler(train: LabeledMatrix) -> Scaler:
    """Column means and sample standard deviations (n-1 denominator)."""
    if train.n_rows < 2:
        raise PreprocessError("need at least 2 rows to fit a scaler")
    means = train.X.mean(axis=0)
    sds = train.X.std(axis=0, ddof=1)
    zero = sds <= 0
    if zero.any():
        bad = train.feature_ids[int(np.flatnonzero(zero)[0])]
        raise ZeroVarianceColumn(f"column {bad!r} has zero variance on training data")
    return Scaler(means, sds)


def apply_scaler(scaler: Scaler, data: LabeledMatrix) -> LabeledMatrix:
    if data.n_features != scaler.means.shape[0]:
        raise DimensionMismatch(
            f"scaler covers {scaler.means.shape[0]} columns, data has {data.n_features}"
        )
    X = (data.X - scaler.means) / scaler.sds
    return LabeledMatrix(X, data.y, data.feature_ids)


def stratified_kfold(
    y: np.ndarray, k: int, seed: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deterministic stratified K-fold: per-class counts differ by at most 1.

    Returns ``k`` pairs ``(train_idx, heldout_idx)`` partitioning ``range(n)``.
    """
    y = np.asarray(y)
    if k < 2:
        raise PreprocessError("k must be at least 2")
    rng = np.random.default_rng(seed)
    heldout: list[list[int]] = [[] for _ in range(k)]
    for label in np.unique(y):
        members = np.flatnonzero(y == label)
        if len(members) < k:
            raise TooFewClassMembers(
                f"class {label} has {len(members)} members, fewer than k={k}"
            )
        members = members[rng.permutation(len(members))]
        for fold in range(k):
            heldout[fold].extend(members[fold::k])
    all_idx = np.arange(len(y))
    folds = []
    for fold in range(k):
        held = np.sort(np.array(heldout[fold], dtype=np.intp))
        train = np.setdiff1d(all_idx, held, assume_unique=True)
        folds.append((train, held))
    return folds
