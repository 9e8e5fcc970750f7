"""Measurement-plan selection.

Three strategies produce the plan of cliques to measure:

* ``privbayes_select`` builds a Bayesian network of bounded in-degree by
  picking (child, parent-set) pairs with the exponential mechanism over
  mutual-information scores, then measures each family clique.
* ``mst_select`` measures all one-way marginals, then grows a maximum
  spanning tree of two-way cliques scored against an independence proxy.
* ``aim_run`` measures all one-way marginals, then iteratively selects the
  workload clique whose current model error most exceeds the noise it would
  cost to measure, annealing the noise scale when a round stops helping.

Every candidate must keep the junction-tree size estimate under the model
size cap at the moment it is added.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import testing
from .budget import PrivacyLedger, sigma_for_rho
from .dataset import Clique, GuardedDataset, Marginal, Measurement, clique_cells
from .domain import Domain
from .errors import InvalidArgument, InvalidConfiguration
from .junction_tree import estimate_model_size
from .mechanisms import NoiseScale, exponential_mechanism, gaussian_mechanism
from .pgm import fit_potentials, project_clique
from .rng import spawn_random

_AIM_INIT_SHARE = 0.1
_AIM_SELECT_SHARE = 0.1
_AIM_ROUNDS_PER_COLUMN = 16
_AIM_MIN_ROUND_RHO = 1e-9
_AIM_ROUND_ITERS = 75
_L1_NOISE_FACTOR = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class Workload:
    """Target cliques with positive importance weights."""

    cliques: tuple[tuple[Clique, float], ...]

    def __post_init__(self):
        if any(w <= 0 for _, w in self.cliques):
            raise InvalidArgument("workload weights must be positive")


def default_workload(domain: Domain) -> Workload:
    """All 2-way cliques at weight 1, plus all 3-way on narrow domains."""
    d = len(domain)
    if d < 1:
        raise InvalidArgument("domain needs at least one column")
    cls: list[tuple[Clique, float]] = [
        (pair, 1.0) for pair in itertools.combinations(range(d), 2)
    ]
    if d <= 8:
        cls += [(tri, 1.0) for tri in itertools.combinations(range(d), 3)]
    return Workload(cliques=tuple(cls))


@dataclass
class SelectionPlan:
    """Ordered measurement spec plus strategy provenance for reproducibility."""

    measurements_spec: list[tuple[Clique, float, float]] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def cliques(self) -> list[Clique]:
        return [cl for cl, _, _ in self.measurements_spec]


def mutual_information(counts) -> float:
    """I(X;Y) in bits from an empirical 2-way contingency table."""
    if isinstance(counts, Marginal):
        counts = counts.counts
    table = np.asarray(counts, dtype=float)
    if table.ndim != 2:
        raise InvalidArgument("mutual information needs a 2-way table")
    total = table.sum()
    if total <= 0:
        raise InvalidArgument("table total must be positive")
    p = table / total
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = p * (np.log2(p) - np.log2(px) - np.log2(py))
    return float(np.sum(np.where(p > 0, terms, 0.0)))


def _mi_sensitivity(n: int) -> float:
    if n < 2:
        return 1.0
    return (1.0 / n) * math.log2(n) + ((n - 1) / n) * math.log2(n / (n - 1))


def _pick(scores, epsilon, sensitivity, rng, exact) -> int:
    if exact or testing.noise_is_disabled():
        return int(np.argmax(scores))
    return exponential_mechanism(scores, epsilon, sensitivity, rng)


def measure_cliques(
    guard: GuardedDataset,
    cliques: Sequence[Clique],
    rho_total: float,
    ledger: PrivacyLedger,
    seed,
    label: str,
    exact: bool = False,
) -> tuple[list[tuple[Clique, float, float]], list[Measurement]]:
    """Measure each clique with the Gaussian mechanism at equal sigma.

    The rho is split evenly, so sigma = sqrt(len(cliques) / (2 rho_total)).
    """
    if not cliques:
        return [], []
    if rho_total <= 0:
        raise InvalidArgument("rho_total must be positive")
    rho_each = rho_total / len(cliques)
    sigma = sigma_for_rho(rho_each)
    scale = NoiseScale.from_sigma(Fraction(sigma))
    specs: list[tuple[Clique, float, float]] = []
    out: list[Measurement] = []
    for i, cl in enumerate(cliques):
        rng = spawn_random(seed, label, i, cl)
        with ledger.spend(f"{label}/{i}", 0.0 if exact else rho_each):
            counts = guard.marginal(cl).counts
            if exact:
                noisy = counts.astype(float)
            else:
                noisy = gaussian_mechanism(counts, 1.0, scale, rng)
        specs.append((cl, sigma, rho_each))
        out.append(Measurement(marginal=Marginal(clique=cl, counts=noisy), sigma=sigma))
    return specs, out


class _SizeCap:
    def __init__(self, domain: Domain, cap_bytes: int):
        self.domain = domain
        self.cap = cap_bytes
        self._cache: dict[frozenset, int] = {}

    def fits(self, cliques: Sequence[Clique], extra: Clique) -> bool:
        key = frozenset(set(cliques) | {extra})
        size = self._cache.get(key)
        if size is None:
            size = estimate_model_size(self.domain, sorted(key))
            self._cache[key] = size
        return size <= self.cap

    def check_base(self, cliques: Sequence[Clique], context: str) -> None:
        if estimate_model_size(self.domain, cliques) > self.cap:
            raise InvalidConfiguration(
                f"size cap {self.cap} bytes cannot hold {context}"
            )


def privbayes_select(
    guard: GuardedDataset,
    domain: Domain,
    ledger: PrivacyLedger,
    k: int,
    size_cap: int,
    seed,
    exact: bool = False,
) -> tuple[SelectionPlan, list[Measurement]]:
    """Bayesian-network selection of degree k.

    Half the remaining budget drives the exponential-mechanism choices of
    (child, parent set) by mutual information; the family cliques are then
    measured with the other half at equal sigma.
    """
    if k < 1:
        raise InvalidArgument("degree k must be >= 1")
    d = len(domain)
    rho_model = ledger.remaining_rho
    if rho_model <= 0:
        raise InvalidArgument("no budget left for selection")
    cap = _SizeCap(domain, size_cap)

    one_ways = [(a,) for a in range(d)]
    cap.check_base(one_ways, "the one-way marginals")

    first = spawn_random(seed, "privbayes", "first").randrange(d)
    order = [first]
    parents: dict[int, Clique] = {first: ()}
    planned: list[Clique] = [(first,)]

    if d > 1:
        rho_sel = rho_model / 2.0
        rho_step = rho_sel / (d - 1)
        eps_step = math.sqrt(8.0 * rho_step)
        n = guard.n_rows
        sens = max(_mi_sensitivity(n), 1e-12)
        for step in range(1, d):
            cands: list[tuple[int, Clique]] = []
            for x in range(d):
                if x in order:
                    continue
                for size in range(0, min(k, len(order)) + 1):
                    for pi in itertools.combinations(sorted(order), size):
                        fam = tuple(sorted({x, *pi}))
                        if cap.fits(planned, fam):
                            cands.append((x, pi))
            if not cands:
                raise InvalidConfiguration(
                    "size cap leaves no admissible (child, parents) candidate"
                )
            rng = spawn_random(seed, "privbayes", "select", step)
            with ledger.spend(f"privbayes/select/{step}", 0.0 if exact else rho_step):
                scores = [self_mi(guard, domain, x, pi) for x, pi in cands]
                idx = _pick(scores, eps_step, sens, rng, exact)
            x, pi = cands[idx]
            order.append(x)
            parents[x] = pi
            planned.append(tuple(sorted({x, *pi})))

    rho_meas = rho_model / 2.0 if d > 1 else rho_model
    specs, measurements = measure_cliques(
        guard, planned, rho_meas, ledger, seed, "privbayes/measure", exact=exact
    )
    plan = SelectionPlan(
        measurements_spec=specs,
        provenance={
            "model": "privbayes",
            "degree": k,
            "order": order,
            "parents": {str(x): list(parents[x]) for x in order},
        },
    )
    return plan, measurements


def self_mi(guard: GuardedDataset, domain: Domain, x: int, pi: Clique) -> float:
    """Mutual information between a child column and its joint parent set."""
    if not pi:
        return 0.0
    fam = tuple(sorted({x, *pi}))
    counts = guard.marginal(fam).counts.reshape(domain.shape(fam))
    axis = fam.index(x)
    table = np.moveaxis(counts, axis, 0).reshape(domain.cardinalities[x], -1)
    total = table.sum()
    if total <= 0:
        return 0.0
    return mutual_information(table)


def mst_select(
    guard: GuardedDataset,
    domain: Domain,
    ledger: PrivacyLedger,
    size_cap: int,
    seed,
    exact: bool = False,
) -> tuple[SelectionPlan, list[Measurement]]:
    """Spanning-tree selection over two-way cliques.

    Thirds of the budget go to measuring one-ways, picking d-1 acyclic edges
    with the exponential mechanism, and measuring the selected two-ways.  The
    edge utility compares the true two-way against the product of the noisy
    one-ways (independence proxy), sensitivity 2.
    """
    d = len(domain)
    if d < 2:
        raise InvalidArgument("spanning-tree selection needs at least 2 columns")
    rho_model = ledger.remaining_rho
    if rho_model <= 0:
        raise InvalidArgument("no budget left for selection")
    cap = _SizeCap(domain, size_cap)
    third = rho_model / 3.0

    one_ways = [(a,) for a in range(d)]
    cap.check_base(one_ways, "the one-way marginals")
    specs1, meas1 = measure_cliques(
        guard, one_ways, third, ledger, seed, "mst/measure1", exact=exact
    )

    # Independence proxy from the (noisy) one-ways.
    n_hat = max(1.0, float(np.mean([m.marginal.total() for m in meas1])))
    probs = []
    for m in meas1:
        p = np.maximum(m.marginal.counts, 0.0)
        p = p / p.sum() if p.sum() > 0 else np.full(p.size, 1.0 / p.size)
        probs.append(p)

    rho_step = third / (d - 1)
    eps_step = math.sqrt(8.0 * rho_step)
    parent = list(range(d))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    planned = list(one_ways)
    edges: list[Clique] = []
    scores: dict[Clique, float] = {}
    for step in range(d - 1):
        cands = [
            pair
            for pair in itertools.combinations(range(d), 2)
            if find(pair[0]) != find(pair[1]) and cap.fits(planned, pair)
        ]
        if not cands:
            break
        rng = spawn_random(seed, "mst", "select", step)
        with ledger.spend(f"mst/select/{step}", 0.0 if exact else rho_step):
            for pair in cands:
                if pair not in scores:
                    true = guard.marginal(pair).counts
                    proxy = np.outer(probs[pair[0]], probs[pair[1]]).reshape(-1) * n_hat
                    scores[pair] = float(np.abs(true - proxy).sum())
            idx = _pick([scores[p] for p in cands], eps_step, 2.0, rng, exact)
        pick = cands[idx]
        parent[find(pick[0])] = find(pick[1])
        edges.append(pick)
        planned.append(pick)

    rho_phase3 = ledger.remaining_rho if not exact else third
    specs2: list[tuple[Clique, float, float]] = []
    meas2: list[Measurement] = []
    if edges:
        specs2, meas2 = measure_cliques(
            guard, edges, rho_phase3, ledger, seed, "mst/measure2", exact=exact
        )
    elif not exact and rho_phase3 > 0:
        # Size cap forbade every edge: fold the rest into the one-ways.
        specs2, meas2 = measure_cliques(
            guard, one_ways, rho_phase3, ledger, seed, "mst/measure1b", exact=exact
        )

    plan = SelectionPlan(
        measurements_spec=specs1 + specs2,
        provenance={"model": "mst", "edges": [list(e) for e in edges]},
    )
    return plan, meas1 + meas2


def aim_run(
    guard: GuardedDataset,
    domain: Domain,
    ledger: PrivacyLedger,
    workload: Workload,
    size_cap: int,
    seed,
    exact: bool = False,
) -> tuple[SelectionPlan, list[Measurement], Optional[dict]]:
    """Adaptive iterative selection against a workload.

    Rounds alternate an exponential-mechanism pick (quality = weighted model
    error minus the expected L1 noise of measuring) with a Gaussian
    measurement and a warm-started refit.  When a measurement moves the model
    less than its noise floor, sigma halves and the per-round budget grows.
    Terminates when the remaining budget cannot fund a round; the remainder
    re-measures the last selected clique.
    """
    if not workload.cliques:
        raise InvalidArgument("workload must be non-empty")
    d = len(domain)
    rho_model = ledger.remaining_rho
    if rho_model <= 0:
        raise InvalidArgument("no budget left for selection")
    cap = _SizeCap(domain, size_cap)
    one_ways = [(a,) for a in range(d)]
    cap.check_base(one_ways, "the one-way marginals")

    rho_round = 0.9 * rho_model / (_AIM_ROUNDS_PER_COLUMN * d)
    rounds_log: list[dict] = []

    if rho_round < _AIM_MIN_ROUND_RHO:
        specs, meas = measure_cliques(
            guard, one_ways, rho_model, ledger, seed, "aim/init", exact=exact
        )
        plan = SelectionPlan(
            measurements_spec=specs,
            provenance={"model": "aim", "rounds": [], "init_only": True},
        )
        return plan, meas, None

    specs, measurements = measure_cliques(
        guard, one_ways, _AIM_INIT_SHARE * rho_model, ledger, seed, "aim/init",
        exact=exact,
    )
    rho_left = rho_model - _AIM_INIT_SHARE * rho_model

    model = fit_potentials(measurements, domain, iters=_AIM_ROUND_ITERS)
    warm = model.clique_potentials
    planned = list(one_ways)
    last_clique: Optional[Clique] = None
    round_no = 0

    while rho_left >= rho_round and round_no < 4 * _AIM_ROUNDS_PER_COLUMN * d:
        cands = [
            (cl, w) for cl, w in workload.cliques if cap.fits(planned, cl)
        ]
        if not cands:
            break
        round_no += 1
        rho_sel = _AIM_SELECT_SHARE * rho_round
        rho_meas = rho_round - rho_sel
        eps_t = math.sqrt(8.0 * rho_sel)
        sigma_t = sigma_for_rho(rho_meas)
        sens = max(w for _, w in cands)

        rng = spawn_random(seed, "aim", "select", round_no)
        model_marg: dict[Clique, np.ndarray] = {}
        with ledger.spend(f"aim/select/{round_no}", 0.0 if exact else rho_sel):
            scores = []
            for cl, w in cands:
                model_marg[cl] = project_clique(model, cl).counts
                true = guard.marginal(cl).counts
                err = float(np.abs(true - model_marg[cl]).sum())
                scores.append(w * (err - _L1_NOISE_FACTOR * sigma_t * clique_cells(domain, cl)))
            idx = _pick(scores, eps_t, sens, rng, exact)
        chosen, _w = cands[idx]

        scale = NoiseScale.from_sigma(Fraction(sigma_t))
        mrng = spawn_random(seed, "aim", "measure", round_no)
        with ledger.spend(f"aim/measure/{round_no}", 0.0 if exact else rho_meas):
            counts = guard.marginal(chosen).counts
            noisy = counts.astype(float) if exact else gaussian_mechanism(
                counts, 1.0, scale, mrng
            )
        measurements.append(
            Measurement(marginal=Marginal(clique=chosen, counts=noisy), sigma=sigma_t)
        )
        specs.append((chosen, sigma_t, rho_round))
        planned.append(chosen)
        last_clique = chosen
        rho_left -= rho_round

        model = fit_potentials(
            measurements, domain, iters=_AIM_ROUND_ITERS, init=warm
        )
        warm = model.clique_potentials

        # Anneal when the measurement moved the model by less than the noise
        # it cost: halve sigma (so quadruple the round budget) from here on.
        moved = float(
            np.abs(project_clique(model, chosen).counts - model_marg[chosen]).sum()
        )
        annealed = moved <= _L1_NOISE_FACTOR * sigma_t * clique_cells(domain, chosen)
        rounds_log.append(
            {"round": round_no, "clique": list(chosen), "sigma": sigma_t,
             "annealed": annealed}
        )
        if annealed:
            rho_round *= 4.0

    if rho_left > _AIM_MIN_ROUND_RHO and not exact:
        final_cl = last_clique if last_clique is not None else one_ways[-1]
        sigma_f = sigma_for_rho(rho_left)
        scale = NoiseScale.from_sigma(Fraction(sigma_f))
        rng = spawn_random(seed, "aim", "final")
        with ledger.spend("aim/final", rho_left):
            noisy = gaussian_mechanism(guard.marginal(final_cl).counts, 1.0, scale, rng)
        measurements.append(
            Measurement(marginal=Marginal(clique=final_cl, counts=noisy), sigma=sigma_f)
        )
        specs.append((final_cl, sigma_f, rho_left))

    plan = SelectionPlan(
        measurements_spec=specs,
        provenance={"model": "aim", "rounds": rounds_log, "init_only": False},
    )
    return plan, measurements, warm
