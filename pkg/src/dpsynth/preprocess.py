"""DP conversion of raw mixed data into an encoded dataset.

Numerical columns are clipped to bounds (user-declared, or DP-extracted with
half the preprocessing budget) and discretized by PrivTree or a uniform grid.
Categorical columns are mapped from their declared categories only; category
discovery is deliberately unsupported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import testing
from .budget import PrivacyLedger, zcdp_of_exponential, zcdp_of_pure
from .dataset import DiscreteDataset
from .domain import ColumnSpec, Domain
from .errors import (
    BudgetRequired,
    EncodingError,
    InvalidArgument,
    ValidationError,
)
from .mechanisms import (
    exponential_mechanism,
    laplace_mechanism,
    sample_discrete_laplace,
)

# PrivTree constants for fanout 2: noise scale 3/eps, per-depth decay lam*ln 2.
_PRIVTREE_LAMBDA_FACTOR = 3.0
_PRIVTREE_COUNT_SHARE = 0.1


@dataclass(frozen=True)
class PrivTreeParams:
    """Split threshold, noise scale, per-depth bias, and recursion cap."""

    theta: float
    lam: Optional[float] = None
    decay: Optional[float] = None
    max_depth: int = 20

    def __post_init__(self):
        if self.theta <= 0:
            raise InvalidArgument("theta must be positive")
        if self.lam is not None and self.lam <= 0:
            raise InvalidArgument("lam must be positive")
        if self.decay is not None and self.decay <= 0:
            raise InvalidArgument("decay must be positive")
        if not 1 <= self.max_depth <= 64:
            raise InvalidArgument("max_depth must be in [1, 64]")


def default_bound_grid() -> np.ndarray:
    """401 candidate bounds: integers -100..100 plus log-spaced tails to 1e9."""
    linear = np.arange(-100, 101, dtype=float)
    tail = np.geomspace(100.0, 1e9, 101)[1:]
    grid = np.unique(np.concatenate([linear, tail, -tail]))
    return grid


def dp_bounds(
    column: Sequence[float],
    epsilon: float,
    grid: Sequence[float],
    rng,
    exact: bool = False,
) -> tuple[float, float]:
    """Pick (lo, hi) grid elements with an exponential mechanism each.

    Utility is minus the number of points left outside the bound (sensitivity
    one), plus a data-independent tightness penalty below half a count so
    ties break toward the tightest enclosing pair.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2:
        raise InvalidArgument("grid needs at least 2 candidates")
    if epsilon <= 0:
        raise InvalidArgument("epsilon must be positive")
    x = np.asarray(column, dtype=float)
    lam = 1.0 / (2.0 * grid.size)

    # The last grid element is reserved for hi so lo < hi always has room.
    lo_grid = grid[:-1]
    below = np.searchsorted(np.sort(x), lo_grid, side="left").astype(float)
    lo_scores = -below - lam * (lo_grid.size - 1 - np.arange(lo_grid.size))
    lo_idx = _select(lo_scores, epsilon / 2.0, rng, exact)
    lo = float(grid[lo_idx])

    hi_grid = grid[lo_idx + 1 :]
    above = x.size - np.searchsorted(np.sort(x), hi_grid, side="right").astype(float)
    hi_scores = -above - lam * np.arange(hi_grid.size)
    hi_idx = _select(hi_scores, epsilon / 2.0, rng, exact)
    return lo, float(hi_grid[hi_idx])


def _select(scores, epsilon, rng, exact) -> int:
    if exact or testing.noise_is_disabled():
        return int(np.argmax(scores))
    return exponential_mechanism(scores, epsilon, 1.0, rng)


def privtree_edges(
    column: Sequence[float],
    epsilon: float,
    lo: float,
    hi: float,
    params: PrivTreeParams,
    rng,
    exact: bool = False,
) -> list[float]:
    """Recursive DP bisection of [lo, hi); leaf boundaries become bin edges.

    A node at depth d splits when count - d*decay + noise clears theta.  The
    per-depth decay makes the whole recursion cost a single epsilon.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise InvalidArgument("bounds must be finite with lo < hi")
    if epsilon <= 0:
        raise InvalidArgument("epsilon must be positive")
    lam = params.lam if params.lam is not None else _PRIVTREE_LAMBDA_FACTOR / epsilon
    if lam < _PRIVTREE_LAMBDA_FACTOR / epsilon - 1e-12:
        raise InvalidArgument("noise scale too small for the charged epsilon")
    decay = params.decay if params.decay is not None else lam * math.log(2.0)

    x = np.sort(np.clip(np.asarray(column, dtype=float), lo, hi))
    noiseless = exact or testing.noise_is_disabled()
    lam_frac = Fraction(lam).limit_denominator(1 << 40)

    edges = [lo]

    def count(a: float, b: float, last: bool) -> int:
        right = np.searchsorted(x, b, side="right" if last else "left")
        left = np.searchsorted(x, a, side="left")
        return int(right - left)

    def visit(a: float, b: float, depth: int) -> None:
        mid = 0.5 * (a + b)
        can_split = depth < params.max_depth and a < mid < b
        if can_split:
            noisy = count(a, b, b == hi) - depth * decay
            if not noiseless:
                noisy += sample_discrete_laplace(lam_frac, rng)
            can_split = noisy > params.theta
        if can_split:
            visit(a, mid, depth + 1)
            visit(mid, b, depth + 1)
        else:
            edges.append(b)

    visit(lo, hi, 0)
    return edges


def uniform_edges(lo: float, hi: float, n_bins: int) -> list[float]:
    """n_bins + 1 equally spaced edges; costs no budget (data-independent)."""
    if n_bins < 1:
        raise InvalidArgument("n_bins must be positive")
    if not lo < hi:
        raise InvalidArgument("lo must be below hi")
    return list(np.linspace(lo, hi, n_bins + 1))


@dataclass(frozen=True)
class ColumnPlan:
    name: str
    kind: str
    categories: Optional[tuple[str, ...]] = None
    edges: Optional[tuple[float, ...]] = None

    @property
    def cardinality(self) -> int:
        if self.kind == "categorical":
            return len(self.categories)
        return len(self.edges) - 1


@dataclass(frozen=True)
class Preprocessor:
    """Fitted per-column encode/decode plans plus the budget split record."""

    plans: tuple[ColumnPlan, ...]
    proc_budget: dict = field(default_factory=dict)

    def plan_for(self, name: str) -> ColumnPlan:
        for p in self.plans:
            if p.name == name:
                return p
        raise InvalidArgument(f"unknown column {name!r}")

    def to_dict(self) -> dict:
        return {
            "plans": [
                {
                    "name": p.name,
                    "kind": p.kind,
                    "categories": list(p.categories) if p.categories else None,
                    "edges": list(p.edges) if p.edges else None,
                }
                for p in self.plans
            ],
            "proc_budget": self.proc_budget,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Preprocessor":
        plans = tuple(
            ColumnPlan(
                name=p["name"],
                kind=p["kind"],
                categories=tuple(p["categories"]) if p.get("categories") else None,
                edges=tuple(p["edges"]) if p.get("edges") else None,
            )
            for p in doc["plans"]
        )
        return cls(plans=plans, proc_budget=doc.get("proc_budget", {}))


def _parse_numeric(values: Sequence, name: str) -> np.ndarray:
    out = np.empty(len(values), dtype=float)
    for i, v in enumerate(values):
        try:
            out[i] = float(v)
        except (TypeError, ValueError):
            raise EncodingError(name, v, "not a decimal number")
        if not math.isfinite(out[i]):
            raise EncodingError(name, v, "not finite")
    return out


def fit_preprocessor(
    data: dict[str, Sequence],
    domain: Domain,
    epsilon_proc: float,
    strategy: str,
    rng,
    ledger: PrivacyLedger,
    n_bins: int = 20,
    grid: Optional[Sequence[float]] = None,
    exact: bool = False,
) -> tuple[Preprocessor, Domain]:
    """Fit encode plans for every column, spending DP budget where required.

    Bounds absent from the domain cost half of epsilon_proc (split evenly
    over the columns that need them); PrivTree discretization costs the other
    half.  Uniform discretization and categorical columns are free.
    """
    if strategy not in ("privtree", "uniform"):
        raise InvalidArgument(f"unknown discretization strategy {strategy!r}")
    for col in domain.columns:
        if col.name not in data:
            raise ValidationError(f"data is missing column {col.name!r}")

    numeric = [c for c in domain.columns if c.kind == "numerical"]
    need_bounds = [c for c in numeric if c.bounds is None]
    need_tree = numeric if strategy == "privtree" else []
    dp_work = bool(need_bounds) or bool(need_tree)
    if dp_work and not exact and epsilon_proc <= 0:
        raise BudgetRequired(
            "preprocessing requires budget: numerical columns need "
            + ("bounds extraction" if need_bounds else "PrivTree discretization")
        )

    eps_bounds = (0.5 * epsilon_proc / len(need_bounds)) if need_bounds else 0.0
    eps_tree = (0.5 * epsilon_proc / len(need_tree)) if need_tree else 0.0

    budget_record: dict = {
        "epsilon_proc": epsilon_proc if dp_work else 0.0,
        "strategy": strategy,
        "bounds": {c.name: eps_bounds for c in need_bounds},
        "trees": {c.name: eps_tree for c in need_tree},
    }

    plans = []
    new_cols = []
    cards = []
    for col in domain.columns:
        if col.kind == "categorical":
            plans.append(
                ColumnPlan(name=col.name, kind="categorical", categories=col.categories)
            )
            new_cols.append(col)
            cards.append(len(col.categories))
            continue

        values = _parse_numeric(data[col.name], col.name)
        if col.bounds is not None:
            lo, hi = col.bounds
        else:
            bound_grid = np.asarray(grid, dtype=float) if grid is not None else default_bound_grid()
            eps_b = eps_bounds if eps_bounds > 0 else 1.0  # parameter only; exact mode selects argmax
            rho_b = 0.0 if exact else 2 * zcdp_of_exponential(eps_b / 2)
            with ledger.spend(f"preprocess/bounds/{col.name}", rho_b):
                lo, hi = dp_bounds(values, eps_b, bound_grid, rng, exact=exact)

        if strategy == "uniform":
            edges = uniform_edges(lo, hi, n_bins)
        else:
            eps_count = _PRIVTREE_COUNT_SHARE * eps_tree
            eps_split = eps_tree - eps_count
            if exact:
                n_est = float(len(values))
            else:
                with ledger.spend(
                    f"preprocess/privtree/{col.name}/count", zcdp_of_pure(eps_count)
                ):
                    n_est = laplace_mechanism(float(len(values)), 1.0, eps_count, rng)
            params = PrivTreeParams(theta=max(5.0, max(n_est, 0.0) / 1000.0))
            eps_s = eps_split if eps_split > 0 else 1.0
            rho_s = 0.0 if exact else zcdp_of_pure(eps_s)
            with ledger.spend(f"preprocess/privtree/{col.name}/tree", rho_s):
                edges = privtree_edges(values, eps_s, lo, hi, params, rng, exact=exact)

        plans.append(ColumnPlan(name=col.name, kind="numerical", edges=tuple(edges)))
        new_cols.append(
            ColumnSpec(
                name=col.name,
                kind="numerical",
                bounds=(float(edges[0]), float(edges[-1])),
                structural_zeros=col.structural_zeros,
            )
        )
        cards.append(len(edges) - 1)

    disc_domain = Domain(columns=tuple(new_cols), cardinalities=tuple(cards))
    prep = Preprocessor(plans=tuple(plans), proc_budget=budget_record)
    return prep, disc_domain


def encode(data: dict[str, Sequence], prep: Preprocessor, domain: Domain) -> DiscreteDataset:
    """Map raw values to integer codes (categories by label, numbers by bin)."""
    n = None
    cols = []
    for spec in domain.columns:
        plan = prep.plan_for(spec.name)
        values = data[spec.name]
        if n is None:
            n = len(values)
        elif len(values) != n:
            raise ValidationError("ragged columns in input data")
        if plan.kind == "categorical":
            mapping = {c: i for i, c in enumerate(plan.categories)}
            codes = np.empty(n, dtype=np.int64)
            for i, v in enumerate(values):
                key = v if isinstance(v, str) else str(v)
                if key not in mapping:
                    raise EncodingError(spec.name, v, "undeclared category")
                codes[i] = mapping[key]
        else:
            x = _parse_numeric(values, spec.name)
            edges = np.asarray(plan.edges)
            x = np.clip(x, edges[0], edges[-1])
            codes = np.searchsorted(edges, x, side="right") - 1
            codes = np.clip(codes, 0, len(edges) - 2).astype(np.int64)
        cols.append(codes)
    cells = np.stack(cols, axis=1) if cols else np.zeros((0, 0), dtype=np.int64)
    return DiscreteDataset(cells=cells, domain=domain)


def decode(
    ds: DiscreteDataset, prep: Preprocessor, rng: np.random.Generator
) -> dict[str, list]:
    """Invert encode: labels back verbatim, bins to uniform draws inside them."""
    out: dict[str, list] = {}
    for j, spec in enumerate(ds.domain.columns):
        plan = prep.plan_for(spec.name)
        codes = ds.cells[:, j]
        if plan.kind == "categorical":
            cats = plan.categories
            out[spec.name] = [cats[c] for c in codes]
        else:
            edges = np.asarray(plan.edges)
            lo = edges[codes]
            hi = edges[codes + 1]
            u = rng.random(len(codes))
            out[spec.name] = (lo + u * (hi - lo)).tolist()
    return out
