"""
Missing-data preprocessing and one-hot encoding

Three steps, in order:
1. Drop features with more than `threshold` of their cells Missing
2. Impute the rest from a temporary class-balanced subsample
   (median for numeric features, mode for categorical ones)
3. Expand categorical features into indicator columns

Usage:
    from src.preprocess import build_imputation_plan, apply_imputation, one_hot_encode

    plan = build_imputation_plan(train, seed=7, threshold=0.30)
    encoded = one_hot_encode(apply_imputation(train, plan))
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .data_model import Dataset, FeatureSpec, missing_fraction
from .errors import AllMissingFeature, MissingCellPresent, SchemaMismatch, SingleClassDataset
from .log import get_logger
from .sampling import make_rng, random_undersample

logger = get_logger(__name__)

FillValue = Union[float, str]


def filter_by_missingness(ds: Dataset, threshold: float) -> Tuple[Dataset, List[int]]:
    """
    Drop features whose Missing fraction is strictly greater than threshold

    A feature at exactly the threshold is retained. Survivors keep their order.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    dropped = [f.index for f in ds.schema if missing_fraction(ds, f.index) > threshold]
    if dropped:
        names = [ds.schema[i].name for i in dropped]
        logger.info(f"Dropping {len(dropped)} feature(s) above {threshold:.0%} missing: {names}")
    gone = set(dropped)
    keep = [f.name for f in ds.schema if f.index not in gone]
    return ds.with_columns(keep), dropped


def median(values: np.ndarray) -> float:
    """Median; even-sized samples average the two central order statistics"""
    return float(np.median(values))


def mode(tokens: pd.Series) -> str:
    """Most frequent token, ties broken by the lexicographically smallest"""
    counts = tokens.value_counts()
    best = counts.max()
    return min(str(t) for t in counts.index[counts == best])


@dataclass
class ImputationPlan:
    """
    Fill values learned from one dataset, replayable on any dataset with the same schema

    Attributes:
        schema: Schema of the dataset the plan was built on
        retained_features: Original indices that survive
        dropped_features: Original indices removed by the missingness filter
        fill_values: Retained feature name -> median (numeric) or mode (categorical)
        balance_seed: Seed of the balanced temporary subsample
        fallback_features: Features whose balanced subsample had no Present cell
    """
    schema: Tuple[FeatureSpec, ...]
    retained_features: List[int]
    dropped_features: List[int]
    fill_values: Dict[str, FillValue]
    balance_seed: int
    fallback_features: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "balance_seed": self.balance_seed,
            "retained_features": [self.schema[i].name for i in self.retained_features],
            "dropped_features": [self.schema[i].name for i in self.dropped_features],
            "fill_values": dict(self.fill_values),
            "fallback_features": list(self.fallback_features),
        }


def build_imputation_plan(ds: Dataset, seed: int, threshold: Optional[float] = None) -> ImputationPlan:
    """
    Derive fill values from a temporary class-balanced subsample

    The temporary dataset is every minority row plus an equal number of
    majority rows drawn without replacement. Only Present cells of that
    subsample are read.

    Args:
        ds: Dataset to learn from (a training split in per-fold mode)
        seed: Seed of the under-sampling draw
        threshold: If given, run the missingness filter first and record what it drops

    Returns:
        ImputationPlan
    """
    negatives, positives = ds.class_counts()
    if negatives == 0 or positives == 0:
        raise SingleClassDataset("imputation plan needs both classes present")

    dropped: List[int] = []
    if threshold is not None:
        _, dropped = filter_by_missingness(ds, threshold)
    gone = set(dropped)
    retained = [f.index for f in ds.schema if f.index not in gone]

    sample = random_undersample(ds.labels, make_rng(seed))
    balanced = ds.frame.iloc[sample.indices]

    fill_values: Dict[str, FillValue] = {}
    fallback: List[str] = []
    for i in retained:
        spec = ds.schema[i]
        present = balanced[spec.name].dropna()
        if present.empty:
            present = ds.frame[spec.name].dropna()
            if present.empty:
                raise AllMissingFeature("feature has no Present cell", column=spec.name)
            logger.warning(f"Balanced subsample has no value for '{spec.name}'; using the full-dataset statistic")
            fallback.append(spec.name)
        if spec.is_categorical:
            fill_values[spec.name] = mode(present)
        else:
            fill_values[spec.name] = median(present.to_numpy(dtype=float))

    return ImputationPlan(
        schema=ds.schema,
        retained_features=retained,
        dropped_features=dropped,
        fill_values=fill_values,
        balance_seed=seed,
        fallback_features=fallback,
    )


def apply_imputation(ds: Dataset, plan: ImputationPlan) -> Dataset:
    """Fill Missing cells of retained features and remove dropped ones"""
    if _schema_key(ds.schema) != _schema_key(plan.schema):
        # A plan replayed on its own output is a no-op
        retained_schema = tuple(plan.schema[i] for i in plan.retained_features)
        if _schema_key(ds.schema) != _schema_key(retained_schema):
            raise SchemaMismatch("dataset schema differs from the schema the plan was built on")

    names = [plan.schema[i].name for i in plan.retained_features]
    subset = ds.with_columns(names)
    frame = subset.frame.copy()
    for spec in subset.schema:
        fill = plan.fill_values[spec.name]
        if spec.is_categorical:
            frame[spec.name] = pd.Series([fill if v is None else v for v in frame[spec.name]], dtype=object)
        else:
            frame[spec.name] = frame[spec.name].fillna(float(fill))
    return Dataset(subset.schema, frame, subset.labels, subset.target_name)


def _schema_key(schema) -> List[Tuple[str, str]]:
    return [(f.name, f.kind.value) for f in schema]


@dataclass(frozen=True)
class ColumnOrigin:
    feature: FeatureSpec
    category: Optional[str] = None

    @property
    def name(self) -> str:
        if self.category is None:
            return self.feature.name
        return f"{self.feature.name}={self.category}"


@dataclass(frozen=True, eq=False)
class EncodedMatrix:
    """
    Fully numeric design matrix

    Attributes:
        values: n x q float matrix, no Missing or non-finite cell
        column_origin: Per column, the source feature and (for indicators) the category
        labels: n binary labels
    """
    values: np.ndarray
    column_origin: Tuple[ColumnOrigin, ...]
    labels: np.ndarray

    @property
    def column_names(self) -> List[str]:
        return [o.name for o in self.column_origin]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    def groups(self) -> Dict[str, List[int]]:
        """Source feature name -> encoded column indices"""
        out: Dict[str, List[int]] = {}
        for j, origin in enumerate(self.column_origin):
            out.setdefault(origin.feature.name, []).append(j)
        return out

    def rows(self, indices) -> Tuple[np.ndarray, np.ndarray]:
        indices = np.asarray(indices, dtype=int)
        return self.values[indices], self.labels[indices]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=self.column_names)
        frame["label"] = self.labels.astype(int)
        return frame


def one_hot_encode(ds: Dataset) -> EncodedMatrix:
    """
    Numeric features pass through; each categorical feature with k observed
    categories becomes k indicator columns (sorted by token, none dropped)
    """
    mask = ds.missing_mask()
    if mask.any():
        row, col = (int(v) for v in np.argwhere(mask)[0])
        raise MissingCellPresent("encode requires a fully imputed dataset", row=row, column=ds.schema[col].name)

    blocks: List[np.ndarray] = []
    origins: List[ColumnOrigin] = []
    for spec in ds.schema:
        col = ds.frame[spec.name]
        if not spec.is_categorical:
            blocks.append(col.to_numpy(dtype=float).reshape(-1, 1))
            origins.append(ColumnOrigin(spec))
            continue
        tokens = col.to_numpy(dtype=object)
        for category in sorted(set(tokens)):
            blocks.append((tokens == category).astype(float).reshape(-1, 1))
            origins.append(ColumnOrigin(spec, category))

    values = np.hstack(blocks) if blocks else np.zeros((ds.n_rows, 0))
    return EncodedMatrix(values, tuple(origins), ds.labels.copy())


def export_preprocessed(
    encoded: EncodedMatrix,
    plan: ImputationPlan,
    out_dir: Union[str, Path],
) -> Tuple[Path, Path]:
    """
    Write the encoded matrix as CSV plus a JSON sidecar

    Returns:
        (csv path, sidecar path)
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "encoded.csv"
    sidecar_path = out_dir / "preprocess.json"

    encoded.to_frame().to_csv(csv_path, index=False, lineterminator="\n")
    sidecar = plan.to_dict()
    sidecar["column_origin"] = [
        {"column": o.name, "feature": o.feature.name, "kind": o.feature.kind.value, "category": o.category}
        for o in encoded.column_origin
    ]
    with open(sidecar_path, "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, ensure_ascii=False)
    return csv_path, sidecar_path
