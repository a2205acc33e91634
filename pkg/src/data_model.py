"""
Tabular cohort representation and CSV ingestion

A Dataset is an immutable n x p grid of cells plus binary labels
(1 = dropout / positive, 0 = non-dropout / negative). Numeric cells are finite
floats and categorical cells are string tokens; a Missing cell is NaN in a
numeric column and None in a categorical one.

Usage:
    from src.data_model import load_csv, write_csv, missing_fraction

    ds = load_csv("cohort.csv", target_column="dropout", categorical_columns={"school"})
    print(missing_fraction(ds, 0))
"""

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import AbstractSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    IndexOutOfRange,
    MalformedCsv,
    NonNumericValue,
    UnknownTarget,
    UnparsableLabel,
)
from .log import get_logger

logger = get_logger(__name__)

DEFAULT_MISSING_TOKENS = frozenset({"", "NA", "NaN"})
DEFAULT_TARGET = "dropout"


class FeatureKind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: FeatureKind
    index: int

    @property
    def is_categorical(self) -> bool:
        return self.kind == FeatureKind.CATEGORICAL


def make_schema(names: Sequence[str], categorical: AbstractSet[str] = frozenset()) -> Tuple[FeatureSpec, ...]:
    """Build a schema with contiguous indices; names must be unique"""
    seen = set()
    for name in names:
        if name in seen:
            raise DataError(f"duplicate feature name '{name}'")
        seen.add(name)
    return tuple(
        FeatureSpec(name, FeatureKind.CATEGORICAL if name in categorical else FeatureKind.NUMERIC, i)
        for i, name in enumerate(names)
    )


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Immutable tabular dataset

    Attributes:
        schema: Ordered feature specs, indices 0..p-1
        frame: n x p cells, columns in schema order (never mutate)
        labels: n binary labels as int8
        target_name: Name of the target column the labels came from
    """
    schema: Tuple[FeatureSpec, ...]
    frame: pd.DataFrame
    labels: np.ndarray
    target_name: str = DEFAULT_TARGET

    def __post_init__(self):
        names = [f.name for f in self.schema]
        if list(self.frame.columns) != names:
            raise DataError("frame columns do not match the schema order")
        if [f.index for f in self.schema] != list(range(len(self.schema))):
            raise DataError("schema indices must be contiguous from 0")
        if len(self.labels) != len(self.frame):
            raise DataError("labels and rows differ in length")
        if len(self.labels) and not np.isin(self.labels, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        for spec in self.schema:
            if not spec.is_categorical:
                col = self.frame[spec.name].to_numpy(dtype=float)
                if np.isinf(col).any():
                    raise NonNumericValue("non-finite numeric value", column=spec.name)

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        labels: Iterable[int],
        categorical: AbstractSet[str] = frozenset(),
        target_name: str = DEFAULT_TARGET,
    ) -> "Dataset":
        """Normalize a DataFrame into a Dataset: float numeric columns, str-or-None categoricals"""
        schema = make_schema(list(frame.columns), categorical)
        columns = {}
        for spec in schema:
            col = frame[spec.name]
            if spec.is_categorical:
                columns[spec.name] = pd.Series(
                    [None if _is_missing(v) else str(v) for v in col], dtype=object
                )
            else:
                columns[spec.name] = pd.Series(pd.to_numeric(col, errors="raise"), dtype=float).reset_index(drop=True)
        normalized = pd.DataFrame(columns, columns=[s.name for s in schema])
        return cls(schema, normalized, np.asarray(list(labels), dtype=np.int8), target_name)

    @property
    def n_rows(self) -> int:
        return len(self.frame)

    @property
    def n_features(self) -> int:
        return len(self.schema)

    @property
    def feature_names(self) -> List[str]:
        return [f.name for f in self.schema]

    @property
    def categorical_names(self) -> frozenset:
        return frozenset(f.name for f in self.schema if f.is_categorical)

    def missing_mask(self) -> np.ndarray:
        """Boolean n x p mask, True where the cell is Missing"""
        return self.frame.isna().to_numpy()

    def class_counts(self) -> Tuple[int, int]:
        """(negatives, positives)"""
        positives = int(self.labels.sum())
        return self.n_rows - positives, positives

    def take(self, rows: Sequence[int]) -> "Dataset":
        """Row subset, in the given order"""
        rows = np.asarray(rows, dtype=int)
        frame = self.frame.iloc[rows].reset_index(drop=True)
        return Dataset(self.schema, frame, self.labels[rows].copy(), self.target_name)

    def with_columns(self, names: Sequence[str]) -> "Dataset":
        """Column subset, re-indexed in the given order"""
        kinds = {f.name: f.kind for f in self.schema}
        schema = tuple(FeatureSpec(name, kinds[name], i) for i, name in enumerate(names))
        return Dataset(schema, self.frame[list(names)].copy(), self.labels, self.target_name)

    def equals(self, other: "Dataset") -> bool:
        """Cell-by-cell equality (Missing equals Missing)"""
        return (
            self.schema == other.schema
            and np.array_equal(self.labels, other.labels)
            and self.frame.equals(other.frame)
        )


def _is_missing(value) -> bool:
    if value is None:
        return True
    return isinstance(value, float) and math.isnan(value)


def missing_fraction(ds: Dataset, feature: int) -> float:
    """Fraction of Missing cells in one column"""
    if not 0 <= feature < ds.n_features:
        raise IndexOutOfRange(f"feature index {feature} outside [0, {ds.n_features})")
    if ds.n_rows == 0:
        return 0.0
    missing = int(ds.frame.iloc[:, feature].isna().sum())
    return missing / ds.n_rows


def select_features(ds: Dataset, names: Sequence[str]) -> Dataset:
    """
    Restrict a dataset to the named columns, keeping the dataset's column order

    Used to rerun an experiment on an earlier time horizon (a subset of the
    measurement waves).
    """
    known = set(ds.feature_names)
    unknown = [n for n in names if n not in known]
    if unknown:
        raise IndexOutOfRange(f"unknown feature(s): {', '.join(unknown)}")
    wanted = set(names)
    return ds.with_columns([n for n in ds.feature_names if n in wanted])


def load_csv(
    path: Union[str, Path],
    target_column: str = DEFAULT_TARGET,
    categorical_columns: AbstractSet[str] = frozenset(),
    missing_tokens: AbstractSet[str] = DEFAULT_MISSING_TOKENS,
    positive_tokens: AbstractSet[str] = frozenset({"1"}),
    negative_tokens: AbstractSet[str] = frozenset({"0"}),
) -> Dataset:
    """
    Read a cohort CSV (UTF-8, header row, RFC-4180 quoting)

    Args:
        path: CSV file
        target_column: Header name of the binary target
        categorical_columns: Columns kept as category tokens; all others are numeric
        missing_tokens: Cell values read as Missing (after stripping whitespace)
        positive_tokens: Target tokens meaning dropout (1)
        negative_tokens: Target tokens meaning non-dropout (0)

    Returns:
        Dataset with column order preserved minus the target
    """
    try:
        first = pd.read_csv(path, header=None, nrows=1, dtype=str, keep_default_na=False, encoding="utf-8")
        raw = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            na_values=[],
            encoding="utf-8",
            on_bad_lines="error",
            skip_blank_lines=True,
        )
    except pd.errors.ParserError as e:
        raise MalformedCsv(f"ragged or unparsable CSV: {e}")
    except pd.errors.EmptyDataError:
        raise MalformedCsv("file has no header row")

    if raw.isna().any().any():
        bad = int(np.where(raw.isna().any(axis=1).to_numpy())[0][0])
        raise MalformedCsv("row has fewer fields than the header", row=bad + 2)

    names = [str(c) for c in first.iloc[0]]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise MalformedCsv(f"duplicate column name(s): {', '.join(duplicates)}", row=1)

    header = [str(c) for c in raw.columns]
    if target_column not in header:
        raise UnknownTarget(f"target column '{target_column}' not in header")
    unknown_cats = set(categorical_columns) - set(header)
    if unknown_cats:
        logger.warning(f"Categorical columns not in header, ignored: {sorted(unknown_cats)}")

    labels = np.empty(len(raw), dtype=np.int8)
    for i, token in enumerate(raw[target_column].str.strip()):
        if token in positive_tokens:
            labels[i] = 1
        elif token in negative_tokens:
            labels[i] = 0
        else:
            raise UnparsableLabel(f"target value {token!r} is not a class token", row=i + 2, column=target_column)

    feature_names = [c for c in header if c != target_column]
    columns = {}
    for name in feature_names:
        cells = raw[name].str.strip()
        missing = cells.isin(missing_tokens).to_numpy()
        if name in categorical_columns:
            columns[name] = pd.Series([None if m else v for v, m in zip(cells, missing)], dtype=object)
            continue
        values = np.full(len(cells), np.nan)
        for i, (cell, is_missing) in enumerate(zip(cells, missing)):
            if is_missing:
                continue
            # float() parses repr output exactly
            try:
                value = float(cell)
            except ValueError:
                value = math.nan
            if not math.isfinite(value):
                raise NonNumericValue(f"value {cell!r} is not a finite number", row=i + 2, column=name)
            values[i] = value
        columns[name] = pd.Series(values, dtype=float)

    frame = pd.DataFrame(columns, columns=feature_names)
    ds = Dataset(make_schema(feature_names, set(categorical_columns)), frame, labels, target_column)
    negatives, positives = ds.class_counts()
    logger.info(f"Loaded {path}: {ds.n_rows} rows, {ds.n_features} features, {positives} positive / {negatives} negative")
    return ds


def write_csv(ds: Dataset, path: Union[str, Path], missing_token: str = "") -> None:
    """Write a dataset so that load_csv re-reads it cell for cell"""
    out = ds.frame.copy()
    for spec in ds.schema:
        if spec.is_categorical:
            out[spec.name] = [missing_token if v is None else v for v in out[spec.name]]
        else:
            out[spec.name] = [missing_token if math.isnan(v) else repr(float(v)) for v in out[spec.name]]
    out[ds.target_name] = ds.labels.astype(int)
    out.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
