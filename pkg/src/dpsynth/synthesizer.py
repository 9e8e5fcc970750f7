"""Pipeline orchestration: preprocess, select, measure, fit, generate.

The (epsilon, delta) budget converts to rho once at the start; preprocessing
mechanisms charge their actual zCDP costs and the configured selector runs on
whatever remains.  Fitted models are immutable and serialize to a single
container file.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .budget import FreeLedger, PrivacyBudget, PrivacyLedger
from .dataset import DiscreteDataset, GuardedDataset, Measurement
from .domain import Domain
from .errors import (
    BudgetRequired,
    InfeasibleCondition,
    InvalidArgument,
    ValidationError,
)
from .pgm import PGModel, apply_structural_zeros, fit_potentials, sample
from .preprocess import Preprocessor, decode, encode, fit_preprocessor
from .rng import spawn_generator, spawn_random
from .selectors import (
    SelectionPlan,
    default_workload,
    measure_cliques,
    mst_select,
    privbayes_select,
    aim_run,
)

FORMAT_VERSION = 1

_MODELS = ("privbayes", "mst", "aim")
_STRATEGIES = ("privtree", "uniform")


@dataclass(frozen=True)
class SynthesizerConfig:
    model: str
    epsilon: float
    delta: float = 1e-5
    epsilon_proc: Optional[float] = None
    degree: int = 2
    size_cap_mb: float = 80.0
    discretization: str = "privtree"
    bins: int = 20
    seed: Optional[int] = None
    iters: int = 1000

    def __post_init__(self):
        if self.model not in _MODELS:
            raise InvalidArgument(f"model must be one of {_MODELS}")
        if self.discretization not in _STRATEGIES:
            raise InvalidArgument(f"discretization must be one of {_STRATEGIES}")
        if self.size_cap_mb <= 0:
            raise InvalidArgument("size_cap_mb must be positive")
        if self.epsilon_proc is not None and not (
            0 < self.epsilon_proc < self.epsilon
        ):
            raise InvalidArgument("epsilon_proc must lie in (0, epsilon)")
        if self.bins < 1 or self.degree < 1 or self.iters < 1:
            raise InvalidArgument("bins, degree and iters must be positive")

    @property
    def size_cap_bytes(self) -> int:
        return int(self.size_cap_mb * (1 << 20))

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "epsilon_proc": self.epsilon_proc,
            "degree": self.degree,
            "size_cap_mb": self.size_cap_mb,
            "discretization": self.discretization,
            "bins": self.bins,
            "seed": self.seed,
            "iters": self.iters,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthesizerConfig":
        return cls(**doc)


@dataclass(frozen=True)
class FittedSynthesizer:
    config: SynthesizerConfig
    domain: Domain
    disc_domain: Domain
    preprocessor: Preprocessor
    pgmodel: PGModel
    plan: SelectionPlan
    measurements: tuple[Measurement, ...]
    ledger_snapshot: dict
    format_version: int = FORMAT_VERSION


@dataclass(frozen=True)
class PretrainedState:
    """Domain, preprocessing, and plan fitted on public data at zero charge."""

    config: SynthesizerConfig
    domain: Domain
    disc_domain: Domain
    preprocessor: Preprocessor
    plan: SelectionPlan
    ledger_snapshot: dict


def _check_schema(data: dict, domain: Domain) -> None:
    missing = [c.name for c in domain.columns if c.name not in data]
    if missing:
        raise ValidationError(f"data is missing columns {missing}")


def _resolve_eps_proc(config: SynthesizerConfig, domain: Domain) -> float:
    """Preprocessing budget: explicit value, or min(0.1*epsilon, 0.1) when
    only discretization needs budget.  DP bounds extraction must be opted
    into explicitly.

    The cap keeps discretization resolution from outrunning the models at
    large epsilon: an uncapped proportional budget drives the tree-based
    binning so fine that fixed-degree selection drowns in sparse-table noise
    and utility stops increasing with budget.
    """
    numeric = [c for c in domain.columns if c.kind == "numerical"]
    need_bounds = [c for c in numeric if c.bounds is None]
    need_tree = bool(numeric) and config.discretization == "privtree"
    if config.epsilon_proc is not None:
        if not (need_bounds or need_tree):
            return 0.0
        return config.epsilon_proc
    if need_bounds:
        raise BudgetRequired(
            "numerical columns lack bounds; set epsilon_proc to fund DP "
            "bounds extraction or supply bounds in the domain"
        )
    if need_tree:
        return min(0.1 * config.epsilon, 0.1)
    return 0.0


def _structural_zero_codes(disc_domain: Domain, prep: Preprocessor) -> dict[int, set[int]]:
    zeros: dict[int, set[int]] = {}
    for j, col in enumerate(disc_domain.columns):
        if not col.structural_zeros:
            continue
        plan = prep.plan_for(col.name)
        codes: set[int] = set()
        if col.kind == "categorical":
            for z in col.structural_zeros:
                codes.add(plan.categories.index(z))
        else:
            edges = plan.edges
            for a, b in col.structural_zeros:
                for k in range(len(edges) - 1):
                    if edges[k] >= a and edges[k + 1] <= b:
                        codes.add(k)
        if codes:
            zeros[j] = codes
    return zeros


def _run_selector(
    config: SynthesizerConfig,
    guard: GuardedDataset,
    disc_domain: Domain,
    ledger: PrivacyLedger,
    seed,
    exact: bool = False,
):
    cap = config.size_cap_bytes
    if config.model == "privbayes":
        plan, meas = privbayes_select(
            guard, disc_domain, ledger, config.degree, cap, seed, exact=exact
        )
        return plan, meas, None
    if config.model == "mst":
        plan, meas = mst_select(guard, disc_domain, ledger, cap, seed, exact=exact)
        return plan, meas, None
    plan, meas, warm = aim_run(
        guard, disc_domain, ledger, default_workload(disc_domain), cap, seed,
        exact=exact,
    )
    return plan, meas, warm


def fit(
    config: SynthesizerConfig,
    data: dict[str, Sequence],
    domain: Domain,
    seed: Optional[int] = None,
) -> FittedSynthesizer:
    """Train a synthesizer end to end under the configured (epsilon, delta)."""
    _check_schema(data, domain)
    seed = seed if seed is not None else config.seed
    budget = PrivacyBudget(config.epsilon, config.delta)
    ledger = PrivacyLedger(budget.rho)

    eps_proc = _resolve_eps_proc(config, domain)
    prep, disc_domain = fit_preprocessor(
        data,
        domain,
        eps_proc,
        config.discretization,
        spawn_random(seed, "preprocess"),
        ledger,
        n_bins=config.bins,
    )
    encoded = encode(data, prep, disc_domain)
    encoded.validate()
    guard = GuardedDataset(encoded, ledger)

    plan, measurements, warm = _run_selector(config, guard, disc_domain, ledger, seed)
    model = fit_potentials(
        measurements, disc_domain, iters=config.iters, init=warm
    )
    zeros = _structural_zero_codes(disc_domain, prep)
    if zeros:
        model = apply_structural_zeros(model, zeros)

    return FittedSynthesizer(
        config=config,
        domain=domain,
        disc_domain=disc_domain,
        preprocessor=prep,
        pgmodel=model,
        plan=plan,
        measurements=tuple(measurements),
        ledger_snapshot=ledger.snapshot(),
    )


def pretrain_public(
    config: SynthesizerConfig,
    public_data: dict[str, Sequence],
    domain: Domain,
    seed: Optional[int] = None,
) -> PretrainedState:
    """Fit preprocessing and select cliques on public data at zero charge."""
    _check_schema(public_data, domain)
    seed = seed if seed is not None else config.seed
    budget = PrivacyBudget(config.epsilon, config.delta)
    ledger = FreeLedger(total_rho=budget.rho)

    eps_proc = (
        config.epsilon_proc
        if config.epsilon_proc is not None
        else min(0.1 * config.epsilon, 0.1)
    )
    prep, disc_domain = fit_preprocessor(
        public_data,
        domain,
        eps_proc,
        config.discretization,
        spawn_random(seed, "preprocess"),
        ledger,
        n_bins=config.bins,
        exact=True,
    )
    encoded = encode(public_data, prep, disc_domain)
    encoded.validate()
    guard = GuardedDataset(encoded, ledger)
    plan, _meas, _warm = _run_selector(
        config, guard, disc_domain, ledger, seed, exact=True
    )
    return PretrainedState(
        config=config,
        domain=domain,
        disc_domain=disc_domain,
        preprocessor=prep,
        plan=plan,
        ledger_snapshot=ledger.snapshot(),
    )


def fit_private(
    state: PretrainedState,
    private_data: dict[str, Sequence],
    seed: Optional[int] = None,
) -> FittedSynthesizer:
    """Measure a pretrained plan's cliques on private data with the full budget."""
    _check_schema(private_data, state.domain)
    seed = seed if seed is not None else state.config.seed
    budget = PrivacyBudget(state.config.epsilon, state.config.delta)
    ledger = PrivacyLedger(budget.rho)

    encoded = encode(private_data, state.preprocessor, state.disc_domain)
    encoded.validate()
    guard = GuardedDataset(encoded, ledger)

    cliques = state.plan.cliques()
    specs, measurements = measure_cliques(
        guard, cliques, ledger.remaining_rho, ledger, seed, "pretrained/measure"
    )
    model = fit_potentials(measurements, state.disc_domain, iters=state.config.iters)
    zeros = _structural_zero_codes(state.disc_domain, state.preprocessor)
    if zeros:
        model = apply_structural_zeros(model, zeros)

    plan = SelectionPlan(
        measurements_spec=specs,
        provenance={**state.plan.provenance, "pretrained": True},
    )
    return FittedSynthesizer(
        config=state.config,
        domain=state.domain,
        disc_domain=state.disc_domain,
        preprocessor=state.preprocessor,
        pgmodel=model,
        plan=plan,
        measurements=tuple(measurements),
        ledger_snapshot=ledger.snapshot(),
    )


def _encode_conditions(
    fitted: FittedSynthesizer, conditions: Optional[dict]
) -> dict[int, set[int]]:
    if not conditions:
        return {}
    evidence: dict[int, set[int]] = {}
    for name, cond in conditions.items():
        j = fitted.disc_domain.index_of(name)
        col = fitted.disc_domain.columns[j]
        plan = fitted.preprocessor.plan_for(name)
        if col.kind == "categorical":
            if not isinstance(cond, str) or cond not in plan.categories:
                raise InvalidArgument(
                    f"condition on {name!r}: {cond!r} is not a declared category"
                )
            evidence[j] = {plan.categories.index(cond)}
        else:
            if isinstance(cond, (tuple, list)) and len(cond) == 2:
                a, b = float(cond[0]), float(cond[1])
            else:
                a = b = float(cond)
            edges = plan.edges
            if a == b:
                # Point condition selects the bin holding the value.
                x = min(max(a, edges[0]), edges[-1])
                k = int(np.clip(np.searchsorted(edges, x, side="right") - 1, 0,
                                len(edges) - 2))
                codes = {k}
            else:
                codes = {
                    k
                    for k in range(len(edges) - 1)
                    if edges[k] >= a and edges[k + 1] <= b
                }
            if not codes:
                raise InfeasibleCondition(
                    f"condition on {name!r} contains no whole bin"
                )
            evidence[j] = codes
    return evidence


def generate(
    fitted: FittedSynthesizer,
    n: int,
    conditions: Optional[dict] = None,
    seed: Optional[int] = None,
) -> dict[str, list]:
    """Sample n rows satisfying the conditions, decoded to raw values."""
    if n < 0:
        raise InvalidArgument("n must be non-negative")
    evidence = _encode_conditions(fitted, conditions)
    codes = sample(
        fitted.pgmodel, n, evidence=evidence, rng=spawn_generator(seed, "sample")
    )
    ds = DiscreteDataset(cells=codes, domain=fitted.disc_domain)
    table = decode(ds, fitted.preprocessor, spawn_generator(seed, "decode"))
    return {c.name: table[c.name] for c in fitted.domain.columns}
