"""Utility scoring of synthetic data against the real data.

Three scores in [0, 1], higher is better: mean 1-way and 2-way histogram
similarity (1 minus total variation distance on a shared grid), and
indistinguishability under a cross-validated linear classifier.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import roc_auc_score

from .domain import Domain
from .errors import InvalidArgument, ValidationError
from .preprocess import _parse_numeric
from .rng import spawn_generator

_DEFAULT_BINS = 20


def _grid_codes(
    table: dict[str, Sequence], domain: Domain, bins: int
) -> tuple[np.ndarray, list[int]]:
    """Encode both kinds of column onto a shared evaluation grid."""
    cols = []
    cards = []
    for spec in domain.columns:
        if spec.name not in table:
            raise ValidationError(f"table is missing column {spec.name!r}")
        values = table[spec.name]
        if spec.kind == "categorical":
            mapping = {c: i for i, c in enumerate(spec.categories)}
            codes = np.array(
                [mapping.get(v if isinstance(v, str) else str(v), -1) for v in values],
                dtype=np.int64,
            )
            if (codes < 0).any():
                bad = next(
                    v for v in values
                    if (v if isinstance(v, str) else str(v)) not in mapping
                )
                raise ValidationError(
                    f"column {spec.name!r}: value {bad!r} not in domain"
                )
            cards.append(len(spec.categories))
        else:
            if spec.bounds is None:
                raise ValidationError(
                    f"column {spec.name!r}: numerical bounds required for scoring"
                )
            lo, hi = spec.bounds
            x = np.clip(_parse_numeric(values, spec.name), lo, hi)
            edges = np.linspace(lo, hi, bins + 1)
            codes = np.clip(
                np.searchsorted(edges, x, side="right") - 1, 0, bins - 1
            ).astype(np.int64)
            cards.append(bins)
        cols.append(codes)
    return np.stack(cols, axis=1), cards


def _tvd(a: np.ndarray, b: np.ndarray) -> float:
    pa = a / a.sum() if a.sum() > 0 else np.full(a.size, 1.0 / a.size)
    pb = b / b.sum() if b.sum() > 0 else np.full(b.size, 1.0 / b.size)
    return 0.5 * float(np.abs(pa - pb).sum())


def similarity_1way(
    real: dict, synth: dict, domain: Domain, bins: int = _DEFAULT_BINS
) -> float:
    """Mean over columns of 1 - TVD between per-column histograms."""
    rc, cards = _grid_codes(real, domain, bins)
    sc, _ = _grid_codes(synth, domain, bins)
    scores = []
    for j, card in enumerate(cards):
        h_r = np.bincount(rc[:, j], minlength=card).astype(float)
        h_s = np.bincount(sc[:, j], minlength=card).astype(float)
        scores.append(1.0 - _tvd(h_r, h_s))
    return float(np.mean(scores))


def similarity_2way(
    real: dict, synth: dict, domain: Domain, bins: int = _DEFAULT_BINS
) -> float:
    """Mean over column pairs of 1 - TVD on the joint grid."""
    if len(domain) < 2:
        raise InvalidArgument("2-way similarity needs at least 2 columns")
    rc, cards = _grid_codes(real, domain, bins)
    sc, _ = _grid_codes(synth, domain, bins)
    scores = []
    for i in range(len(cards)):
        for j in range(i + 1, len(cards)):
            size = cards[i] * cards[j]
            h_r = np.bincount(rc[:, i] * cards[j] + rc[:, j], minlength=size)
            h_s = np.bincount(sc[:, i] * cards[j] + sc[:, j], minlength=size)
            scores.append(1.0 - _tvd(h_r.astype(float), h_s.astype(float)))
    return float(np.mean(scores))


def _one_hot(codes: np.ndarray, cards: list[int]) -> sparse.csr_matrix:
    n = codes.shape[0]
    offsets = np.concatenate([[0], np.cumsum(cards)[:-1]])
    cols = (codes + offsets[None, :]).reshape(-1)
    rows = np.repeat(np.arange(n), codes.shape[1])
    data = np.ones(cols.size)
    return sparse.csr_matrix((data, (rows, cols)), shape=(n, int(np.sum(cards))))


def distinguishability(
    real: dict,
    synth: dict,
    domain: Domain,
    folds: int = 5,
    seed: Optional[int] = None,
    bins: int = _DEFAULT_BINS,
) -> float:
    """How hard a linear classifier finds telling real rows from synthetic.

    Out-of-fold AUC maps to 2 * (1 - max(AUC, 0.5)): indistinguishable data
    scores 1, perfectly separable data scores 0.
    """
    rc, cards = _grid_codes(real, domain, bins)
    sc, _ = _grid_codes(synth, domain, bins)
    if rc.shape[0] == 0 or sc.shape[0] == 0:
        raise InvalidArgument("both tables must be non-empty")
    X = _one_hot(np.concatenate([rc, sc]), cards)
    y = np.concatenate([np.ones(rc.shape[0]), np.zeros(sc.shape[0])])
    n = y.size
    if n < folds:
        raise InvalidArgument("fewer rows than folds")

    rng = spawn_generator(seed, "distinguish")
    perm = rng.permutation(n)
    oof = np.zeros(n)
    for f in range(folds):
        test = perm[f::folds]
        train = np.setdiff1d(perm, test, assume_unique=True)
        if len(np.unique(y[train])) < 2:
            oof[test] = 0.5
            continue
        clf = LogisticRegression(
            penalty="l2", C=1.0, solver="liblinear", max_iter=200
        )
        clf.fit(X[train], y[train])
        oof[test] = clf.predict_proba(X[test])[:, 1]
    auc = roc_auc_score(y, oof)
    return float(np.clip(2.0 * (1.0 - max(auc, 0.5)), 0.0, 1.0))


def utility_report(
    real: dict,
    synth: dict,
    domain: Domain,
    bins: int = _DEFAULT_BINS,
    folds: int = 5,
    seed: Optional[int] = None,
) -> dict:
    """The three scores and their arithmetic mean, as a JSON-friendly dict."""
    s1 = similarity_1way(real, synth, domain, bins)
    s2 = similarity_2way(real, synth, domain, bins)
    s3 = distinguishability(real, synth, domain, folds=folds, seed=seed, bins=bins)
    return {
        "similarity_1way": s1,
        "similarity_2way": s2,
        "distinguishability": s3,
        "mean": (s1 + s2 + s3) / 3.0,
    }
