import os

import numpy as np
import pytest

from dpsynth.dataset import column_table, read_csv
from dpsynth.domain import ColumnSpec, Domain, load_domain

DATA_DIR = os.path.join(
    os.path.dirname(__file__), "..", "src", "dpsynth", "data"
)


def fixture_path(name: str) -> str:
    return os.path.join(DATA_DIR, name)


def categorical_domain(*cards: int) -> Domain:
    cols = tuple(
        ColumnSpec(
            name=f"c{i}",
            kind="categorical",
            categories=tuple(f"v{j}" for j in range(k)),
        )
        for i, k in enumerate(cards)
    )
    return Domain(columns=cols, cardinalities=tuple(cards))


@pytest.fixture(scope="session")
def mixed5():
    header, rows = read_csv(fixture_path("mixed5.csv"))
    return column_table(header, rows), load_domain(fixture_path("mixed5_domain.json"))


@pytest.fixture(scope="session")
def mixed10():
    header, rows = read_csv(fixture_path("mixed10.csv"))
    return column_table(header, rows), load_domain(fixture_path("mixed10_domain.json"))


def random_dataset(domain: Domain, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    cols = [rng.integers(0, k, size=n) for k in domain.cardinalities]
    return np.stack(cols, axis=1)
