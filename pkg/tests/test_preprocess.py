import math
import random

import numpy as np
import pytest

from dpsynth import testing
from dpsynth.budget import PrivacyLedger
from dpsynth.domain import ColumnSpec, Domain, parse_domain_document
from dpsynth.errors import BudgetRequired, EncodingError, InvalidArgument
from dpsynth.preprocess import (
    PrivTreeParams,
    decode,
    dp_bounds,
    default_bound_grid,
    encode,
    fit_preprocessor,
    privtree_edges,
    uniform_edges,
)


def test_uniform_edges_examples():
    assert uniform_edges(0, 1, 4) == pytest.approx([0, 0.25, 0.5, 0.75, 1])
    assert uniform_edges(-1, 1, 1) == pytest.approx([-1, 1])
    assert len(uniform_edges(3.5, 9.25, 13)) == 14
    with pytest.raises(InvalidArgument):
        uniform_edges(0, 1, 0)
    with pytest.raises(InvalidArgument):
        uniform_edges(2, 1, 3)


def test_default_bound_grid_shape():
    grid = default_bound_grid()
    assert grid.size == 401
    assert grid[0] == -1e9 and grid[-1] == 1e9
    ints = np.arange(-100, 101)
    assert np.isin(ints, grid).all()


def test_dp_bounds_high_epsilon_is_tightest_pair():
    rng = random.Random(1)
    grid = np.arange(-100, 101, dtype=float)
    data = [3.2, 4.4, 8.9, 5.0]
    lo, hi = dp_bounds(data, 1e6, grid, rng)
    assert (lo, hi) == (3.0, 9.0)


def test_dp_bounds_all_equal_picks_enclosing_unit():
    rng = random.Random(2)
    grid = np.arange(-100, 101, dtype=float)
    lo, hi = dp_bounds([5.0] * 50, 1e6, grid, rng)
    assert (lo, hi) == (5.0, 6.0)


def test_dp_bounds_outputs_come_from_grid():
    grid = np.array([-10.0, -1.0, 0.0, 2.5, 7.0, 30.0])
    for seed in range(10):
        lo, hi = dp_bounds([1.0, 2.0], 0.5, grid, random.Random(seed))
        assert lo in grid and hi in grid and lo < hi
    with pytest.raises(InvalidArgument):
        dp_bounds([1.0], 1.0, [0.0], random.Random(0))


def _reference_privtree(x, lo, hi, theta, decay, max_depth):
    """Independent recursion: split while count - depth*decay > theta."""
    edges = [lo]

    def visit(a, b, depth):
        mid = 0.5 * (a + b)
        count = sum(1 for v in x if a <= v < b or (b == hi and v == b))
        if depth < max_depth and a < mid < b and count - depth * decay > theta:
            visit(a, mid, depth + 1)
            visit(mid, b, depth + 1)
        else:
            edges.append(b)

    visit(lo, hi, 0)
    return edges


def test_privtree_no_split_when_theta_exceeds_n():
    x = [0.5] * 20
    params = PrivTreeParams(theta=25.0)
    with testing.noise_disabled():
        edges = privtree_edges(x, 1.0, 0.0, 1.0, params, random.Random(0))
    assert edges == [0.0, 1.0]


def test_privtree_bimodal_matches_reference():
    n = 400
    x = [0.1] * (n // 2) + [0.9] * (n // 2)
    params = PrivTreeParams(theta=n / 4, max_depth=6)
    lam = 3.0  # epsilon = 1
    decay = lam * math.log(2)
    with testing.noise_disabled():
        edges = privtree_edges(x, 1.0, 0.0, 1.0, params, random.Random(0))
    want = _reference_privtree(x, 0.0, 1.0, n / 4, decay, 6)
    assert edges == pytest.approx(want)
    # fine bins exist around both modes, coarse elsewhere
    widths = np.diff(edges)
    in_modes = [w for e, w in zip(edges, widths) if e < 0.15 or 0.85 <= e]
    assert min(in_modes) < max(widths)


def test_privtree_reference_equivalence_on_random_data():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        x = rng.normal(0.5, 0.2, size=rng.integers(50, 300)).clip(0, 1).tolist()
        theta = max(5.0, len(x) / 30)
        params = PrivTreeParams(theta=theta, max_depth=8)
        with testing.noise_disabled():
            got = privtree_edges(x, 2.0, 0.0, 1.0, params, random.Random(seed))
        want = _reference_privtree(x, 0.0, 1.0, theta, 1.5 * math.log(2), 8)
        assert got == pytest.approx(want)


def test_privtree_determinism_and_bounds():
    x = list(np.random.default_rng(3).normal(5, 2, 500).clip(0, 10))
    params = PrivTreeParams(theta=10.0, max_depth=5)
    e1 = privtree_edges(x, 1.0, 0.0, 10.0, params, random.Random(7))
    e2 = privtree_edges(x, 1.0, 0.0, 10.0, params, random.Random(7))
    assert e1 == e2
    assert e1[0] == 0.0 and e1[-1] == 10.0
    assert len(e1) <= 2**5 + 1
    assert all(a < b for a, b in zip(e1, e1[1:]))


def test_privtree_rejects_undercharged_noise_scale():
    params = PrivTreeParams(theta=5.0, lam=0.1)
    with pytest.raises(InvalidArgument):
        privtree_edges([0.5], 1.0, 0.0, 1.0, params, random.Random(0))


def _numeric_domain(names, bounds=None):
    cols = tuple(
        ColumnSpec(name=n, kind="numerical", bounds=bounds) for n in names
    )
    return Domain(columns=cols, cardinalities=tuple(1 for _ in names))


def test_fit_preprocessor_budget_split_two_numeric_columns():
    rng = np.random.default_rng(0)
    data = {"a": rng.normal(0, 1, 300).tolist(), "b": rng.normal(5, 2, 300).tolist()}
    domain = _numeric_domain(["a", "b"])
    ledger = PrivacyLedger(10.0)
    prep, disc = fit_preprocessor(
        data, domain, 0.1, "privtree", random.Random(1), ledger
    )
    assert prep.proc_budget["bounds"] == {"a": 0.025, "b": 0.025}
    assert prep.proc_budget["trees"] == {"a": 0.025, "b": 0.025}
    labels = [label for label, _ in ledger.log]
    assert any("bounds/a" in l for l in labels)
    assert any("privtree/b" in l for l in labels)
    # actual zCDP charges stay within the pure-DP conversion of eps_proc
    assert ledger.spent_rho <= 0.1**2 / 2 + 1e-12


def test_fit_preprocessor_budget_conservation_random_configs():
    # total preprocessing charge stays within the pure-DP conversion of
    # eps_proc for arbitrary column mixes and budgets
    rng = np.random.default_rng(7)
    for trial in range(12):
        n_num = int(rng.integers(1, 4))
        with_bounds = bool(rng.integers(0, 2))
        eps_proc = float(rng.uniform(0.02, 1.5))
        cols = tuple(
            ColumnSpec(
                name=f"n{j}", kind="numerical",
                bounds=(0.0, 10.0) if with_bounds else None,
            )
            for j in range(n_num)
        )
        domain = Domain(columns=cols, cardinalities=tuple(1 for _ in cols))
        data = {f"n{j}": rng.uniform(1, 9, 200).tolist() for j in range(n_num)}
        ledger = PrivacyLedger(10.0)
        fit_preprocessor(
            data, domain, eps_proc, "privtree", random.Random(trial), ledger
        )
        assert ledger.spent_rho <= eps_proc**2 / 2 + 1e-12
        assert ledger.spent_rho == pytest.approx(
            sum(r for _, r in ledger.log), abs=1e-12
        )


def test_fit_preprocessor_all_categorical_is_free():
    domain = parse_domain_document(
        {"columns": [{"name": "c", "kind": "categorical", "categories": ["x", "y"]}]}
    )
    ledger = PrivacyLedger(1.0)
    prep, disc = fit_preprocessor(
        {"c": ["x", "y", "x"]}, domain, 0.0, "privtree", random.Random(0), ledger
    )
    assert ledger.spent_rho == 0.0
    assert disc.cardinalities == (2,)


def test_fit_preprocessor_uniform_with_bounds_is_free():
    domain = _numeric_domain(["a"], bounds=(0.0, 1.0))
    ledger = PrivacyLedger(1.0)
    prep, disc = fit_preprocessor(
        {"a": [0.1, 0.9]}, domain, 0.0, "uniform", random.Random(0), ledger, n_bins=4
    )
    assert ledger.spent_rho == 0.0
    assert prep.plan_for("a").edges == pytest.approx((0, 0.25, 0.5, 0.75, 1.0))


def test_fit_preprocessor_requires_budget_for_dp_work():
    domain = _numeric_domain(["a"])
    with pytest.raises(BudgetRequired):
        fit_preprocessor(
            {"a": [1.0, 2.0]}, domain, 0.0, "privtree", random.Random(0),
            PrivacyLedger(1.0),
        )


def test_encode_decode_categorical_roundtrip():
    domain = parse_domain_document(
        {
            "columns": [
                {"name": "c", "kind": "categorical", "categories": ["a", "b", "c"]}
            ]
        }
    )
    ledger = PrivacyLedger(1.0)
    prep, disc = fit_preprocessor(
        {"c": ["a", "c"]}, domain, 0.0, "uniform", random.Random(0), ledger
    )
    table = {"c": ["c", "a", "b", "b"]}
    ds = encode(table, prep, disc)
    out = decode(ds, prep, np.random.default_rng(0))
    assert out == table


def test_encode_numeric_clipping_and_bins():
    domain = _numeric_domain(["a"], bounds=(0.0, 1.0))
    ledger = PrivacyLedger(1.0)
    prep, disc = fit_preprocessor(
        {"a": [0.5]}, domain, 0.0, "uniform", random.Random(0), ledger, n_bins=4
    )
    ds = encode({"a": [-5.0, 0.26, 1.0, 2.0]}, prep, disc)
    assert ds.cells[:, 0].tolist() == [0, 1, 3, 3]
    out = decode(ds, prep, np.random.default_rng(1))
    for v, code in zip(out["a"], ds.cells[:, 0]):
        assert prep.plan_for("a").edges[code] <= v < prep.plan_for("a").edges[code + 1]


def test_encode_rejects_undeclared_category():
    domain = parse_domain_document(
        {"columns": [{"name": "c", "kind": "categorical", "categories": ["a"]}]}
    )
    ledger = PrivacyLedger(1.0)
    prep, disc = fit_preprocessor(
        {"c": ["a"]}, domain, 0.0, "uniform", random.Random(0), ledger
    )
    with pytest.raises(EncodingError) as err:
        encode({"c": ["zzz"]}, prep, disc)
    assert "c" in str(err.value) and "zzz" in str(err.value)
