"""DP auditing harness.

Two attacks, both assuming white-box access to the fitted model:

* A repeated distinguishing game: craft worst-case neighboring datasets
  around an out-of-distribution target record, train on one of them at
  random, and score how strongly the output points at the target.  Error
  rates over many runs convert to an empirical privacy loss via
  Clopper-Pearson upper bounds swept over decision thresholds.
* A support-collision audit of a raw noise mechanism: exact output values
  are hashed into a set and membership of fresh probes acts as the
  distinguisher.  Because the Gaussian family is parameterized by sigma
  alone, one audit covers every (epsilon, delta) pair on that sigma's curve.

Three deliberately broken reference fixtures ship with the harness (a naive
binary-float Gaussian, a pipeline that derives its domain from the data, and
a pipeline with a hard-coded rng seed); each must trip its audit in CI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .domain import ColumnSpec, Domain
from .errors import EncodingError, InvalidArgument
from .pgm import sample
from .preprocess import encode
from .rng import derive_seed, spawn_generator, spawn_random
from .synthesizer import SynthesizerConfig, fit

_DEFAULT_CONFIDENCE = 0.95
_BASELINE_ROWS = 4
_SYNTH_ROWS = 1000


@dataclass(frozen=True)
class AuditOutcome:
    eps_emp: float
    eps_claimed: float
    delta: float
    confidence: float
    decisions: dict
    violation: bool

    def to_dict(self) -> dict:
        return {
            "eps_emp": self.eps_emp,
            "eps_claimed": self.eps_claimed,
            "delta": self.delta,
            "confidence": self.confidence,
            "runs": sum(self.decisions.values()),
            "counts": dict(self.decisions),
            "violation": self.violation,
        }


def craft_worst_case(template: Domain) -> tuple[dict, dict, dict]:
    """Worst-case neighbors: m identical baseline rows, plus one target row
    whose every cell sits at the opposite end of the domain."""
    if len(template) < 2:
        raise InvalidArgument("template needs at least 2 columns")
    lo_row: dict = {}
    hi_row: dict = {}
    for col in template.columns:
        if col.kind == "categorical":
            if len(col.categories) < 2:
                raise InvalidArgument(
                    f"column {col.name!r} needs at least 2 categories"
                )
            lo_row[col.name] = col.categories[0]
            hi_row[col.name] = col.categories[-1]
        else:
            if col.bounds is None:
                raise InvalidArgument(f"column {col.name!r} needs bounds")
            lo_row[col.name] = col.bounds[0]
            hi_row[col.name] = col.bounds[1]
    d0 = {name: [v] * _BASELINE_ROWS for name, v in lo_row.items()}
    d1 = {name: vals + [hi_row[name]] for name, vals in d0.items()}
    return d0, d1, hi_row


class AuditArtifact:
    """White-box view of one trained model: synthetic codes plus the released
    noisy measurements."""

    def __init__(self, synthetic_codes, disc_domain, preprocessor, measurements):
        self.synthetic_codes = np.asarray(synthetic_codes, dtype=np.int64)
        self.disc_domain = disc_domain
        self.preprocessor = preprocessor
        self.measurements = tuple(measurements)

    def score(self, target_row: dict) -> float:
        """Count of the target's joint cell in the synthetic output plus the
        noisy-measurement mass at the target's cells."""
        try:
            enc = encode(
                {k: [v] for k, v in target_row.items()},
                self.preprocessor,
                self.disc_domain,
            )
        except EncodingError:
            return 0.0
        target = enc.cells[0]
        synth_count = 0.0
        if self.synthetic_codes.size:
            synth_count = float(
                np.all(self.synthetic_codes == target[None, :], axis=1).sum()
            )
        mass = 0.0
        for m in self.measurements:
            shape = self.disc_domain.shape(m.marginal.clique)
            idx = int(
                np.ravel_multi_index(
                    tuple(target[a] for a in m.marginal.clique), shape
                )
            )
            mass += float(m.marginal.counts[idx])
        return synth_count + mass


def pipeline_trainer(
    config: SynthesizerConfig, domain: Domain, n_synth: int = _SYNTH_ROWS
) -> Callable:
    """The real fit+generate pipeline wrapped for the distinguishing game."""

    def trainer(table: dict, seed: int) -> AuditArtifact:
        fitted = fit(config, table, domain, seed=seed)
        codes = sample(
            fitted.pgmodel, n_synth, rng=spawn_generator(seed, "audit-synth")
        )
        return AuditArtifact(
            codes, fitted.disc_domain, fitted.preprocessor, fitted.measurements
        )

    return trainer


def run_distinguishing_game(
    trainer: Callable,
    d0: dict,
    d1: dict,
    target: dict,
    runs: int,
    seed: Optional[int] = None,
    workers: int = 1,
    min_runs: int = 100,
) -> list[tuple[int, float]]:
    """Train `runs` models on a secretly chosen neighbor and score each.

    The secret bits are an exactly balanced shuffled sequence, so both arms
    get runs/2 models.  Per-run seeds derive from (seed, run index), making
    results independent of worker count.
    """
    if runs < min_runs:
        raise InvalidArgument(f"need at least {min_runs} runs")
    bits = np.array([1] * (runs // 2) + [0] * (runs - runs // 2))
    spawn_generator(seed, "bits").shuffle(bits)

    def one(i: int) -> tuple[int, float]:
        b = int(bits[i])
        table = d1 if b == 1 else d0
        run_seed = derive_seed(seed if seed is not None else 0, "audit-run", i)
        try:
            artifact = trainer(table, run_seed)
        except Exception as exc:
            raise RuntimeError(f"trainer failed on run {i}: {exc}") from exc
        return b, float(artifact.score(target))

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(runs)))
    return [one(i) for i in range(runs)]


def _cp_upper(k: int, n: int, confidence: float) -> float:
    """One-sided Clopper-Pearson upper confidence bound on a binomial rate."""
    if k >= n:
        return 1.0
    return float(stats.beta.ppf(confidence, k + 1, n - k))


def eps_emp_from_decisions(
    decisions: Sequence[tuple[int, float]],
    delta: float,
    eps_claimed: float,
    confidence: float = _DEFAULT_CONFIDENCE,
) -> AuditOutcome:
    """Empirical epsilon via a threshold sweep with Clopper-Pearson bounds.

    For every threshold (both decision orientations), the upper-bounded
    FPR/FNR feed max(ln((1-delta-FPR)/FNR), ln((1-delta-FNR)/FPR)); the
    sweep maximum, floored at zero, is eps_emp.
    """
    scores1 = np.array([s for b, s in decisions if b == 1])
    scores0 = np.array([s for b, s in decisions if b == 0])
    if scores1.size == 0 or scores0.size == 0:
        raise InvalidArgument("both arms must be non-empty")
    if not 0.0 < delta < 1.0:
        raise InvalidArgument("delta must lie in (0, 1)")

    cuts = np.unique(np.concatenate([scores0, scores1]))
    thresholds = np.concatenate([[-np.inf], (cuts[:-1] + cuts[1:]) / 2.0, [np.inf]])

    best = (0.0, {"tp": int(scores1.size), "fp": int(scores0.size), "tn": 0, "fn": 0})
    for tau in thresholds:
        for flip in (False, True):
            if flip:
                pred1_1 = scores1 <= tau
                pred1_0 = scores0 <= tau
            else:
                pred1_1 = scores1 >= tau
                pred1_0 = scores0 >= tau
            tp = int(pred1_1.sum())
            fn = int(scores1.size - tp)
            fp = int(pred1_0.sum())
            tn = int(scores0.size - fp)
            fpr_ub = _cp_upper(fp, scores0.size, confidence)
            fnr_ub = _cp_upper(fn, scores1.size, confidence)
            for num, den in ((1 - delta - fpr_ub, fnr_ub), (1 - delta - fnr_ub, fpr_ub)):
                if num <= 0:
                    continue
                eps = math.log(num / den) if den > 0 else math.inf
                if eps > best[0]:
                    best = (eps, {"tp": tp, "fp": fp, "tn": tn, "fn": fn})

    eps_emp = max(0.0, best[0])
    return AuditOutcome(
        eps_emp=eps_emp,
        eps_claimed=eps_claimed,
        delta=delta,
        confidence=confidence,
        decisions=best[1],
        violation=eps_emp > eps_claimed,
    )


def support_collision_audit(
    mechanism: Callable,
    a: float,
    b: float,
    probes: int,
    support_samples: int,
    delta: float,
    eps_claimed: float,
    seed: Optional[int] = None,
    confidence: float = _DEFAULT_CONFIDENCE,
) -> AuditOutcome:
    """Hash-set membership distinguisher over exact output values.

    Builds S_a from support_samples draws of mechanism(a); the decision for a
    fresh probe y is [y in S_a].  A mechanism whose output support depends on
    the input's float magnitude separates the arms; an exact grid sampler
    does not.
    """
    if probes < 10_000 or support_samples < 10_000:
        raise InvalidArgument("probes and support_samples must be >= 10^4")
    rng_support = spawn_random(seed, "support")
    s_a = {mechanism(a, rng_support) for _ in range(support_samples)}
    rng_a = spawn_random(seed, "probe-a")
    rng_b = spawn_random(seed, "probe-b")
    decisions: list[tuple[int, float]] = []
    for _ in range(probes):
        decisions.append((1, 1.0 if mechanism(a, rng_a) in s_a else 0.0))
        decisions.append((0, 1.0 if mechanism(b, rng_b) in s_a else 0.0))
    return eps_emp_from_decisions(decisions, delta, eps_claimed, confidence)


def support_collision_audit_sweep(
    mechanism: Callable,
    a: float,
    b: float,
    probes: int,
    support_samples: int,
    delta: float,
    eps_claimed: float,
    seed: Optional[int] = None,
    confidence: float = _DEFAULT_CONFIDENCE,
) -> AuditOutcome:
    """Run the collision audit with the hash set on each arm; keep the worse.

    The signal is self-collision in the coarser support, so the audit must
    not depend on which input the caller listed first.
    """
    first = support_collision_audit(
        mechanism, a, b, probes, support_samples, delta, eps_claimed, seed, confidence
    )
    second = support_collision_audit(
        mechanism, b, a, probes, support_samples, delta, eps_claimed,
        derive_seed(seed if seed is not None else 0, "swap"), confidence,
    )
    return first if first.eps_emp >= second.eps_emp else second


def default_audit_template() -> Domain:
    cols = (
        ColumnSpec(name="u", kind="categorical", categories=("a0", "a1")),
        ColumnSpec(name="v", kind="categorical", categories=("b0", "b1")),
    )
    return Domain(columns=cols, cardinalities=(2, 2))


def audit_pipeline(
    config: SynthesizerConfig,
    runs: int,
    epsilon: float,
    delta: float,
    seed: Optional[int] = None,
    template: Optional[Domain] = None,
    trainer: Optional[Callable] = None,
    workers: int = 1,
    min_runs: int = 100,
) -> AuditOutcome:
    """Full-pipeline distinguishing game at the claimed (epsilon, delta)."""
    template = template if template is not None else default_audit_template()
    d0, d1, target = craft_worst_case(template)
    if trainer is None:
        game_config = SynthesizerConfig(
            **{**config.to_dict(), "epsilon": epsilon, "delta": delta}
        )
        trainer = pipeline_trainer(game_config, template)
    decisions = run_distinguishing_game(
        trainer, d0, d1, target, runs, seed=seed, workers=workers, min_runs=min_runs
    )
    return eps_emp_from_decisions(decisions, delta, eps_claimed=epsilon)


# ---------------------------------------------------------------------------
# Reference-buggy fixtures.  Each must trip its audit.
# ---------------------------------------------------------------------------


def naive_float_gaussian(sigma: float) -> Callable:
    """The classic broken mechanism: value + sigma * standard normal, straight
    through binary floating point."""

    def mechanism(value: float, rng) -> float:
        return value + sigma * rng.gauss(0.0, 1.0)

    return mechanism


def domain_from_data_trainer(
    config: SynthesizerConfig, n_synth: int = _SYNTH_ROWS
) -> Callable:
    """Broken pipeline: extracts the domain from the training data itself."""

    def trainer(table: dict, seed: int) -> AuditArtifact:
        cols = []
        cards = []
        for name, values in table.items():
            if all(isinstance(v, (int, float)) for v in values):
                lo, hi = float(min(values)), float(max(values))
                hi = hi if hi > lo else lo + 1.0
                cols.append(ColumnSpec(name=name, kind="numerical", bounds=(lo, hi)))
                cards.append(1)
            else:
                cats = tuple(sorted({str(v) for v in values}))
                cols.append(ColumnSpec(name=name, kind="categorical", categories=cats))
                cards.append(len(cats))
        leaked_domain = Domain(columns=tuple(cols), cardinalities=tuple(cards))
        fitted = fit(config, table, leaked_domain, seed=seed)
        codes = sample(
            fitted.pgmodel, n_synth, rng=spawn_generator(seed, "audit-synth")
        )
        return AuditArtifact(
            codes, fitted.disc_domain, fitted.preprocessor, fitted.measurements
        )

    return trainer


def fixed_rng_trainer(
    config: SynthesizerConfig, domain: Domain, n_synth: int = _SYNTH_ROWS
) -> Callable:
    """Broken pipeline: ignores the per-run seed and always uses the same one."""

    def trainer(table: dict, seed: int) -> AuditArtifact:
        fitted = fit(config, table, domain, seed=1234567)
        codes = sample(
            fitted.pgmodel, n_synth, rng=spawn_generator(1234567, "audit-synth")
        )
        return AuditArtifact(
            codes, fitted.disc_domain, fitted.preprocessor, fitted.measurements
        )

    return trainer
