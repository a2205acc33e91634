"""
Synthetic cohorts with a known signal

Stand-in for a private student cohort: numeric columns are class-conditional
Gaussians (the positive class is shifted by `class_separation` on the
informative columns only), categorical columns skew their category odds
towards one token for the positive class, and every feature cell is then
blanked independently with probability `missing_rate` (MCAR).

Column names are `num_00, num_01, ...` then `cat_00, ...`; informative numeric
columns come first. Category tokens are `c0, c1, ...`.

Usage:
    from src.config import SyntheticSpec
    from src.synthetic import generate_synthetic

    ds = generate_synthetic(SyntheticSpec(n=2000, positive_rate=0.05, seed=7))
"""

from typing import List, Mapping, Union

import numpy as np
import pandas as pd

from .config import SyntheticSpec
from .data_model import Dataset
from .log import get_logger
from .sampling import make_rng

logger = get_logger(__name__)


def numeric_names(spec: SyntheticSpec) -> List[str]:
    return [f"num_{i:02d}" for i in range(spec.p_numeric)]


def categorical_names(spec: SyntheticSpec) -> List[str]:
    return [f"cat_{j:02d}" for j in range(spec.p_categorical)]


def informative_names(spec: SyntheticSpec) -> List[str]:
    """Numeric columns that carry the class signal"""
    return numeric_names(spec)[: spec.informative]


def generate_synthetic(spec: Union[SyntheticSpec, Mapping]) -> Dataset:
    """
    Draw a cohort according to `spec`

    The positive count is exactly round(n * positive_rate); positives are
    placed at random row positions. Identical specs give identical datasets.
    """
    if not isinstance(spec, SyntheticSpec):
        spec = SyntheticSpec.from_mapping(spec)
    rng = make_rng(spec.seed)

    n_pos = round(spec.n * spec.positive_rate)
    labels = np.zeros(spec.n, dtype=np.int8)
    labels[:n_pos] = 1
    labels = rng.permutation(labels)
    positive = labels == 1

    columns = {}
    numeric = rng.standard_normal((spec.n, spec.p_numeric))
    numeric[np.ix_(positive, np.arange(spec.informative))] += spec.class_separation
    for i, name in enumerate(numeric_names(spec)):
        columns[name] = numeric[:, i]

    tokens = np.array([f"c{c}" for c in range(spec.n_categories)], dtype=object)
    base = np.full(spec.n_categories, 1.0 / spec.n_categories)
    for j, name in enumerate(categorical_names(spec)):
        # The positive class favours one token per column, more strongly with larger separation
        skewed = np.ones(spec.n_categories)
        skewed[j % spec.n_categories] += spec.class_separation
        skewed /= skewed.sum()
        draws = np.where(
            positive,
            rng.choice(spec.n_categories, size=spec.n, p=skewed),
            rng.choice(spec.n_categories, size=spec.n, p=base),
        )
        columns[name] = tokens[draws]

    frame = pd.DataFrame(columns, columns=numeric_names(spec) + categorical_names(spec))
    if spec.missing_rate > 0:
        blank = rng.random(frame.shape) < spec.missing_rate
        for k, name in enumerate(frame.columns):
            if name.startswith("cat_"):
                frame[name] = pd.Series([None if b else v for v, b in zip(frame[name], blank[:, k])], dtype=object)
            else:
                frame[name] = frame[name].mask(blank[:, k])

    ds = Dataset.from_frame(frame, labels, categorical=set(categorical_names(spec)))
    logger.info(
        f"Generated synthetic cohort: {spec.n} rows, {ds.n_features} features, "
        f"{n_pos} positive ({spec.informative} informative numeric)"
    )
    return ds
