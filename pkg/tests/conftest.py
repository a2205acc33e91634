"""
Shared pytest setup: project root on sys.path, the `slow` marker and small datasets
"""

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# Add project root to path so `src` imports resolve
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import SyntheticSpec  # noqa: E402
from src.data_model import Dataset  # noqa: E402
from src.synthetic import generate_synthetic  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: statistical checks on full-size synthetic cohorts")


@pytest.fixture
def mixed_dataset() -> Dataset:
    """12 rows, 4 positives, one numeric column with gaps and one categorical column"""
    frame = pd.DataFrame(
        {
            "age": [15.0, 16.0, np.nan, 14.0, 15.5, 17.0, 16.5, np.nan, 15.0, 14.5, 16.0, 15.0],
            "school": ["a", "b", "a", None, "c", "a", "b", "b", "a", "c", None, "a"],
            "score": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0],
        }
    )
    labels = [1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0]
    return Dataset.from_frame(frame, labels, categorical={"school"})


@pytest.fixture
def xor_data():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    return X, y


@pytest.fixture
def gaussian_data():
    """Two overlapping Gaussian classes, 1 in 5 positive"""
    rng = np.random.default_rng(3)
    y = np.zeros(200, dtype=np.int8)
    y[:40] = 1
    X = rng.standard_normal((200, 4))
    X[y == 1, :2] += 1.5
    return X, y


@pytest.fixture
def small_cohort() -> Dataset:
    """Balanced 60-row synthetic cohort with one categorical column"""
    spec = SyntheticSpec(
        n=60, p_numeric=4, p_categorical=1, positive_rate=0.5, class_separation=1.5, missing_rate=0.05, seed=11
    )
    return generate_synthetic(spec)
