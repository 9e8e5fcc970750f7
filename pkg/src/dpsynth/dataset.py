"""Encoded datasets, cliques, and exact marginal counting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .budget import PrivacyLedger
from .domain import Domain
from .errors import CorruptData, DpSynthError, InvalidArgument, ValidationError

Clique = tuple[int, ...]


def make_clique(attrs: Iterable[int], domain: Domain) -> Clique:
    cl = tuple(sorted(set(int(a) for a in attrs)))
    if cl and (cl[0] < 0 or cl[-1] >= len(domain)):
        raise InvalidArgument(f"clique {cl} outside domain of {len(domain)} columns")
    return cl


def clique_cells(domain: Domain, clique: Sequence[int]) -> int:
    """Number of cells in the clique's contingency table (1 for the empty clique)."""
    return int(math.prod(domain.cardinalities[a] for a in clique))


@dataclass(frozen=True)
class Marginal:
    """Counts over a clique, row-major with the last attribute fastest."""

    clique: Clique
    counts: np.ndarray

    def total(self) -> float:
        return float(self.counts.sum())


@dataclass(frozen=True)
class Measurement:
    """A noisy marginal with its Gaussian scale and loss weight."""

    marginal: Marginal
    sigma: float
    weight: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise InvalidArgument("sigma must be positive")


class DiscreteDataset:
    """Integer-encoded table; every model trains on one of these."""

    def __init__(self, cells: np.ndarray, domain: Domain):
        cells = np.asarray(cells, dtype=np.int64)
        if cells.ndim != 2 or cells.shape[1] != len(domain):
            raise InvalidArgument("cells must be an (n_rows, n_columns) matrix")
        self.cells = cells
        self.domain = domain

    @property
    def n_rows(self) -> int:
        return int(self.cells.shape[0])

    def validate(self) -> None:
        for j, card in enumerate(self.domain.cardinalities):
            col = self.cells[:, j]
            if col.size and (col.min() < 0 or col.max() >= card):
                raise CorruptData(
                    f"column {self.domain.columns[j].name!r} has cells outside "
                    f"[0, {card})"
                )


def marginal_counts(data: DiscreteDataset, clique: Sequence[int], domain: Domain) -> Marginal:
    """Exact contingency-table counts of the rows restricted to the clique."""
    cl = make_clique(clique, domain)
    shape = domain.shape(cl)
    size = int(math.prod(shape)) if cl else 1
    if data.n_rows == 0:
        return Marginal(clique=cl, counts=np.zeros(size, dtype=float))
    sub = data.cells[:, list(cl)]
    for k, a in enumerate(cl):
        col = sub[:, k]
        if col.min() < 0 or col.max() >= domain.cardinalities[a]:
            raise CorruptData(
                f"column {domain.columns[a].name!r} has out-of-range cells"
            )
    if not cl:
        return Marginal(clique=cl, counts=np.array([float(data.n_rows)]))
    flat = np.ravel_multi_index(tuple(sub[:, k] for k in range(len(cl))), shape)
    counts = np.bincount(flat, minlength=size).astype(float)
    return Marginal(clique=cl, counts=counts)


class GuardedDataset:
    """Private-data accessor that only answers inside a ledger charge scope.

    Selectors and mechanisms read training data exclusively through this
    guard, which is what lets the taint test assert that no private read
    escapes DP accounting.
    """

    def __init__(self, data: DiscreteDataset, ledger: PrivacyLedger):
        self._data = data
        self._ledger = ledger
        self.domain = data.domain

    @property
    def n_rows(self) -> int:
        return self._data.n_rows

    def marginal(self, clique: Sequence[int]) -> Marginal:
        self._check()
        return marginal_counts(self._data, clique, self.domain)

    def _check(self) -> None:
        if not self._ledger.charge_active:
            raise DpSynthError(
                "private data read outside a ledger charge scope"
            )


def read_csv(path_or_text) -> tuple[list[str], list[list[str]]]:
    """RFC-4180 CSV with a header row; returns (header, rows of raw strings)."""
    if hasattr(path_or_text, "read"):
        lines = path_or_text.read().splitlines()
    else:
        try:
            with open(path_or_text, "r", encoding="utf-8", newline="") as fh:
                lines = fh.read().splitlines()
        except OSError:
            lines = str(path_or_text).splitlines()
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("CSV is empty (missing header row)")
    rows = [row for row in reader if row]
    for row in rows:
        if len(row) != len(header):
            raise ValidationError(
                f"CSV row has {len(row)} fields, header has {len(header)}"
            )
    return header, rows


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def column_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> dict[str, list[str]]:
    return {name: [row[j] for row in rows] for j, name in enumerate(header)}
