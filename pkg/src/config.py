"""
Configuration layer

Loads `.env.local` from the project root (BALENS_* variables) and defines the
validated records every experiment is described by: tree parameters,
per-classifier hyperparameters, CSV tokens, the synthetic cohort spec and the experiment
config itself.

Usage:
    from src.config import ExperimentConfig, ClassifierKind

    config = ExperimentConfig.from_mapping({"K": 6, "seed": 7, "classifiers": ["brf"]})
"""

import math
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigInvalid, SpecInvalid

# Load environment variables FIRST so every default below sees them
project_root = Path(__file__).parent.parent
env_path = project_root / ".env.local"
load_dotenv(env_path)


def env_seed(default: int = 0) -> int:
    """Seed fallback from BALENS_SEED"""
    raw = os.getenv("BALENS_SEED")
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigInvalid(f"BALENS_SEED must be an integer, got {raw!r}")


def env_threads() -> int:
    raw = os.getenv("BALENS_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigInvalid(f"BALENS_THREADS must be an integer, got {raw!r}")
    return os.cpu_count() or 1


def default_out_dir() -> str:
    return os.getenv("BALENS_OUT", "balens_out")


def env_tokens(name: str, default: List[str]) -> List[str]:
    """Comma-separated token list from the environment; an empty item is the empty token"""
    raw = os.getenv(name)
    if raw is None:
        return list(default)
    return [token.strip() for token in raw.split(",")]


class CsvFormat(BaseModel):
    """
    How cohort CSV cells are read

    Attributes:
        missing_tokens: Cell values read as Missing ($BALENS_MISSING_TOKENS)
        positive_tokens: Target values meaning dropout, label 1 ($BALENS_POSITIVE_TOKENS)
        negative_tokens: Target values meaning non-dropout, label 0 ($BALENS_NEGATIVE_TOKENS)
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    missing_tokens: List[str] = Field(default_factory=lambda: env_tokens("BALENS_MISSING_TOKENS", ["", "NA", "NaN"]))
    positive_tokens: List[str] = Field(default_factory=lambda: env_tokens("BALENS_POSITIVE_TOKENS", ["1"]))
    negative_tokens: List[str] = Field(default_factory=lambda: env_tokens("BALENS_NEGATIVE_TOKENS", ["0"]))

    @model_validator(mode="after")
    def _check(self):
        if not self.positive_tokens or not self.negative_tokens:
            raise ValueError("positive and negative label tokens must not be empty")
        overlap = set(self.positive_tokens) & set(self.negative_tokens)
        if overlap:
            raise ValueError(f"token(s) {sorted(overlap)} mean both classes")
        clash = (set(self.positive_tokens) | set(self.negative_tokens)) & set(self.missing_tokens)
        if clash:
            raise ValueError(f"label token(s) {sorted(clash)} are also missing tokens")
        return self

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "CsvFormat":
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigInvalid(_summarize(e))


class ClassifierKind(str, Enum):
    """The four balance-aware ensembles, keyed by their CLI names"""
    EASY_ENSEMBLE = "ee"
    RUSBOOST = "rusboost"
    BALANCED_BAGGING = "bagging"
    BALANCED_RANDOM_FOREST = "brf"

    @property
    def label(self) -> str:
        """Report label used in printed tables"""
        return _LABELS[self]

    @property
    def code(self) -> int:
        """Stable integer used as a seed spawn key; never reuse a retired code"""
        return _CODES[self]


_LABELS = {
    ClassifierKind.EASY_ENSEMBLE: "E-Ensemble",
    ClassifierKind.RUSBOOST: "B-Boosting",
    ClassifierKind.BALANCED_BAGGING: "B-Bagging",
    ClassifierKind.BALANCED_RANDOM_FOREST: "B-RandomForest",
}

_CODES = {
    ClassifierKind.BALANCED_RANDOM_FOREST: 1,
    ClassifierKind.EASY_ENSEMBLE: 2,
    ClassifierKind.RUSBOOST: 3,
    ClassifierKind.BALANCED_BAGGING: 4,
}

# Printed-table order
ALL_CLASSIFIERS: List[ClassifierKind] = [
    ClassifierKind.EASY_ENSEMBLE,
    ClassifierKind.RUSBOOST,
    ClassifierKind.BALANCED_BAGGING,
    ClassifierKind.BALANCED_RANDOM_FOREST,
]


class TreeParams(BaseModel):
    """
    Base-learner settings

    Attributes:
        max_depth: Depth limit, None for unlimited
        min_split: Minimum rows in a node for it to be split
        min_leaf: Minimum rows in each child of an accepted split
        features_per_split: Candidate columns per node: an integer, "sqrt" (ceil of sqrt q) or "all"
        criterion: Split-quality criterion; only Gini is implemented
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_depth: Optional[int] = Field(default=None, ge=1)
    min_split: int = Field(default=2, ge=2)
    min_leaf: int = Field(default=1, ge=1)
    features_per_split: Union[int, Literal["all", "sqrt"]] = "all"
    criterion: Literal["gini"] = "gini"

    @field_validator("features_per_split")
    @classmethod
    def _positive_count(cls, value):
        if isinstance(value, int) and value < 1:
            raise ValueError("features_per_split must be >= 1")
        return value

    def resolve_features(self, n_columns: int) -> int:
        """Number of candidate columns examined per node for a q-column matrix"""
        if self.features_per_split == "all":
            return n_columns
        if self.features_per_split == "sqrt":
            return max(1, math.ceil(math.sqrt(n_columns)))
        return min(int(self.features_per_split), n_columns)


STUMP = TreeParams(max_depth=1)


class Hyperparams(BaseModel):
    """
    Per-classifier hyperparameters

    Attributes:
        n_estimators: Trees (forest, bagging) or boosting rounds (RUSBoost)
        n_subsets: EasyEnsemble balanced subsets
        boost_rounds: AdaBoost rounds per EasyEnsemble subset
        tree: Base learner settings
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_estimators: int = Field(default=100, ge=1)
    n_subsets: int = Field(default=10, ge=1)
    boost_rounds: int = Field(default=10, ge=1)
    tree: TreeParams = TreeParams()

    @classmethod
    def defaults(cls, kind: ClassifierKind) -> "Hyperparams":
        """Default settings of the reference imbalanced-ensemble toolkit"""
        if kind == ClassifierKind.BALANCED_RANDOM_FOREST:
            return cls(n_estimators=100, tree=TreeParams(features_per_split="sqrt"))
        if kind == ClassifierKind.BALANCED_BAGGING:
            return cls(n_estimators=10)
        if kind == ClassifierKind.RUSBOOST:
            return cls(n_estimators=50, tree=STUMP)
        return cls(n_subsets=10, boost_rounds=10, tree=STUMP)


class SyntheticSpec(BaseModel):
    """
    Shape of a synthetic cohort

    Attributes:
        n: Rows
        p_numeric: Numeric columns; the first n_informative carry signal
        p_categorical: Categorical columns with class-skewed category odds
        n_informative: Informative numeric columns (default: half of p_numeric, rounded up)
        n_categories: Category tokens per categorical column
        positive_rate: Fraction of positive (dropout) rows, rounded to a count
        class_separation: Mean gap between classes on informative columns
        missing_rate: MCAR probability that any feature cell is Missing
        seed: Generator seed
    """
    model_config = ConfigDict(extra="forbid")

    n: int = 2000
    p_numeric: int = 20
    p_categorical: int = 0
    n_informative: Optional[int] = None
    n_categories: int = 3
    positive_rate: float = 0.05
    class_separation: float = 2.0
    missing_rate: float = 0.0
    seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        if self.n < 4:
            raise ValueError("n must be >= 4")
        if not 0.0 < self.positive_rate < 1.0:
            raise ValueError("positive_rate must lie in (0, 1)")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("missing_rate must lie in [0, 1)")
        if self.p_numeric < 0 or self.p_categorical < 0 or self.p_numeric + self.p_categorical < 1:
            raise ValueError("need at least one feature column")
        if self.n_categories < 2:
            raise ValueError("n_categories must be >= 2")
        if self.class_separation < 0 or not math.isfinite(self.class_separation):
            raise ValueError("class_separation must be a finite nonnegative number")
        if self.n_informative is not None and not 0 <= self.n_informative <= self.p_numeric:
            raise ValueError("n_informative must lie in [0, p_numeric]")
        positives = round(self.n * self.positive_rate)
        if positives < 1 or positives > self.n - 1:
            raise ValueError("positive_rate leaves one class empty")
        return self

    @property
    def informative(self) -> int:
        if self.n_informative is not None:
            return self.n_informative
        return (self.p_numeric + 1) // 2

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "SyntheticSpec":
        try:
            return cls(**values)
        except ValidationError as e:
            raise SpecInvalid(_summarize(e))


class ExperimentConfig(BaseModel):
    """
    Everything that determines an evaluation run

    Attributes:
        classifiers: Which ensembles to evaluate, in report order
        K: Number of stratified folds
        seed: Experiment seed; all child seeds derive from it
        paper_mode: Global imputation before CV instead of per-fold plans
        missingness_threshold: Features missing in more than this fraction are dropped
        hyperparams: Per-classifier overrides; missing kinds use their defaults
        top_k: Length of the ranked importance view
        threads: Worker count for fold/classifier tasks (never affects results)
        dataset: Source path, echoed for provenance only
        csv_format: Tokens the dataset was read with, echoed for provenance
    """
    model_config = ConfigDict(extra="forbid")

    classifiers: List[ClassifierKind] = Field(default_factory=lambda: list(ALL_CLASSIFIERS))
    K: int = 6
    seed: int = 0
    paper_mode: bool = False
    missingness_threshold: float = 0.30
    hyperparams: Dict[ClassifierKind, Hyperparams] = Field(default_factory=dict)
    top_k: int = Field(default=20, ge=1)
    threads: int = Field(default=1, ge=1)
    dataset: Optional[str] = None
    csv_format: CsvFormat = Field(default_factory=CsvFormat)

    @field_validator("hyperparams", mode="before")
    @classmethod
    def _merge_defaults(cls, value):
        """Partial mappings override a classifier's defaults instead of replacing them"""
        if not isinstance(value, Mapping):
            return value
        merged = {}
        for key, params in value.items():
            if isinstance(params, Mapping):
                try:
                    kind = ClassifierKind(key)
                except ValueError:
                    merged[key] = params
                    continue
                base = Hyperparams.defaults(kind).model_dump()
                tree = {**base.pop("tree"), **params.get("tree", {})}
                params = {**base, **{k: v for k, v in params.items() if k != "tree"}, "tree": tree}
            merged[key] = params
        return merged

    @model_validator(mode="after")
    def _check(self):
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if not 0.0 <= self.missingness_threshold <= 1.0:
            raise ValueError("missingness_threshold must lie in [0, 1]")
        if not self.classifiers:
            raise ValueError("at least one classifier is required")
        if len(set(self.classifiers)) != len(self.classifiers):
            raise ValueError("classifiers must not repeat")
        return self

    def params_for(self, kind: ClassifierKind) -> Hyperparams:
        return self.hyperparams.get(kind) or Hyperparams.defaults(kind)

    def echo(self) -> Dict[str, Any]:
        """JSON-ready dump with every classifier's effective hyperparameters"""
        data = self.model_dump(mode="json")
        data["hyperparams"] = {
            kind.value: self.params_for(kind).model_dump(mode="json") for kind in self.classifiers
        }
        return data

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "ExperimentConfig":
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigInvalid(_summarize(e))


def _summarize(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        loc = ".".join(str(p) for p in item.get("loc", ())) or "config"
        parts.append(f"{loc}: {item.get('msg')}")
    return "; ".join(parts)
