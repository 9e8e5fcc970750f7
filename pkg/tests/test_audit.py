import math
import random

import numpy as np
import pytest

from conftest import categorical_domain
from dpsynth.audit import (
    AuditArtifact,
    audit_pipeline,
    craft_worst_case,
    default_audit_template,
    domain_from_data_trainer,
    eps_emp_from_decisions,
    fixed_rng_trainer,
    naive_float_gaussian,
    pipeline_trainer,
    run_distinguishing_game,
    support_collision_audit,
    support_collision_audit_sweep,
    _cp_upper,
)
from dpsynth.errors import InvalidArgument
from dpsynth.synthesizer import SynthesizerConfig
from dpsynth.preprocess import fit_preprocessor
from dpsynth.budget import PrivacyLedger


def test_cp_upper_zero_errors_closed_form():
    n = 500
    assert _cp_upper(0, n, 0.95) == pytest.approx(1 - 0.05 ** (1 / n), rel=1e-9)
    assert _cp_upper(n, n, 0.95) == 1.0
    assert 0 < _cp_upper(3, 100, 0.95) < 1


def test_eps_emp_perfect_separation_matches_formula():
    decisions = [(1, 1.0)] * 500 + [(0, 0.0)] * 500
    out = eps_emp_from_decisions(decisions, delta=1e-3, eps_claimed=1.0)
    cp = 1 - 0.05 ** (1 / 500)
    want = math.log((1 - 1e-3 - cp) / cp)
    assert out.eps_emp == pytest.approx(want, rel=1e-9)
    assert out.eps_emp == pytest.approx(5.11, abs=0.01)
    assert out.violation
    assert sum(out.decisions.values()) == 1000


def test_eps_emp_random_scores_near_zero():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        decisions = [(1, float(rng.normal())) for _ in range(400)]
        decisions += [(0, float(rng.normal())) for _ in range(400)]
        out = eps_emp_from_decisions(decisions, delta=1e-3, eps_claimed=1.0)
        assert out.eps_emp < 0.5


def test_eps_emp_monotone_in_separation():
    rng = np.random.default_rng(0)
    base0 = rng.normal(0.0, 1.0, 300)
    base1 = rng.normal(0.0, 1.0, 300)
    prev = -1.0
    for shift in [0.0, 1.0, 2.5, 6.0]:
        decisions = [(0, float(s)) for s in base0]
        decisions += [(1, float(s + shift)) for s in base1]
        out = eps_emp_from_decisions(decisions, delta=1e-3, eps_claimed=1.0)
        assert out.eps_emp >= prev - 1e-9
        prev = out.eps_emp


def test_eps_emp_respects_information_ceiling():
    decisions = [(1, 1.0)] * 200 + [(0, 0.0)] * 200
    out = eps_emp_from_decisions(decisions, delta=1e-3, eps_claimed=1.0)
    ceiling = math.log((1 - 1e-3) / _cp_upper(0, 200, 0.95))
    assert out.eps_emp <= ceiling + 1e-12


def test_eps_emp_detects_reversed_separation():
    decisions = [(1, 0.0)] * 300 + [(0, 1.0)] * 300
    out = eps_emp_from_decisions(decisions, delta=1e-3, eps_claimed=1.0)
    assert out.eps_emp > 3.0


def test_eps_emp_rejects_empty_arm():
    with pytest.raises(InvalidArgument):
        eps_emp_from_decisions([(1, 0.5)], delta=1e-3, eps_claimed=1.0)


def test_craft_worst_case_shape():
    template = categorical_domain(3, 2, 4)
    d0, d1, target = craft_worst_case(template)
    assert all(len(v) == 4 for v in d0.values())
    assert all(len(v) == 5 for v in d1.values())
    for name in d0:
        assert d1[name][:4] == d0[name]
        assert target[name] == d1[name][-1]
        assert target[name] not in d0[name]
    assert craft_worst_case(template) == (d0, d1, target)  # deterministic
    with pytest.raises(InvalidArgument):
        craft_worst_case(categorical_domain(3))


def test_game_balanced_arms_and_leaky_trainer():
    template = default_audit_template()
    d0, d1, target = craft_worst_case(template)
    ledger = PrivacyLedger(1.0)
    prep, disc = fit_preprocessor(
        d1, template, 0.0, "uniform", random.Random(0), ledger
    )

    def leaky_trainer(table, seed):
        # returns the training data verbatim as "synthetic"
        from dpsynth.preprocess import encode

        codes = encode(table, prep, disc).cells
        return AuditArtifact(codes, disc, prep, [])

    decisions = run_distinguishing_game(
        leaky_trainer, d0, d1, target, runs=100, seed=0
    )
    bits = [b for b, _ in decisions]
    assert bits.count(1) == 50 and bits.count(0) == 50
    scores1 = {s for b, s in decisions if b == 1}
    scores0 = {s for b, s in decisions if b == 0}
    assert scores1 == {1.0} and scores0 == {0.0}
    out = eps_emp_from_decisions(decisions, delta=1e-3, eps_claimed=1.0)
    assert out.violation


def test_game_constant_trainer_no_signal():
    template = default_audit_template()
    d0, d1, target = craft_worst_case(template)
    ledger = PrivacyLedger(1.0)
    prep, disc = fit_preprocessor(
        d1, template, 0.0, "uniform", random.Random(0), ledger
    )

    def constant_trainer(table, seed):
        return AuditArtifact(np.zeros((10, 2), dtype=np.int64), disc, prep, [])

    decisions = run_distinguishing_game(
        constant_trainer, d0, d1, target, runs=100, seed=1
    )
    out = eps_emp_from_decisions(decisions, delta=1e-3, eps_claimed=1.0)
    assert out.eps_emp == pytest.approx(0.0)


def test_game_requires_min_runs():
    template = default_audit_template()
    d0, d1, target = craft_worst_case(template)
    with pytest.raises(InvalidArgument):
        run_distinguishing_game(lambda t, s: None, d0, d1, target, runs=10)


def test_game_propagates_trainer_failure_with_run_index():
    template = default_audit_template()
    d0, d1, target = craft_worst_case(template)

    def broken(table, seed):
        raise ValueError("boom")

    with pytest.raises(RuntimeError) as err:
        run_distinguishing_game(broken, d0, d1, target, runs=100, seed=2)
    assert "run 0" in str(err.value)


def test_support_collision_identical_arms():
    mech = naive_float_gaussian(2.0)
    out = support_collision_audit(
        mech, 1.0, 1.0, probes=10_000, support_samples=10_000,
        delta=1e-3, eps_claimed=1.0, seed=3,
    )
    assert out.eps_emp <= 0.2
    assert not out.violation


def test_support_collision_validates_sizes():
    with pytest.raises(InvalidArgument):
        support_collision_audit(
            naive_float_gaussian(1.0), 0.0, 1.0, probes=10, support_samples=10,
            delta=1e-3, eps_claimed=1.0,
        )


def test_naive_float_fixture_trips_collision_audit():
    out = support_collision_audit_sweep(
        naive_float_gaussian(3.83), 0.0, 2.0**40,
        probes=10_000, support_samples=10_000, delta=1e-3, eps_claimed=1.0, seed=4,
    )
    assert out.violation
    assert out.eps_emp > 2.0


def test_workers_do_not_change_results():
    template = default_audit_template()
    d0, d1, target = craft_worst_case(template)
    config = SynthesizerConfig(model="mst", epsilon=1.0, delta=1e-3)
    trainer = pipeline_trainer(config, template, n_synth=50)
    serial = run_distinguishing_game(trainer, d0, d1, target, runs=100, seed=5)
    pooled = run_distinguishing_game(
        trainer, d0, d1, target, runs=100, seed=5, workers=4
    )
    assert serial == pooled


def test_audit_pipeline_smoke_correct_and_fixtures():
    config = SynthesizerConfig(model="mst", epsilon=1.0, delta=1e-3)
    ok = audit_pipeline(config, runs=100, epsilon=1.0, delta=1e-3, seed=6)
    assert not ok.violation

    bad_domain = audit_pipeline(
        config, runs=100, epsilon=1.0, delta=1e-3, seed=6,
        trainer=domain_from_data_trainer(config),
    )
    assert bad_domain.violation

    bad_rng = audit_pipeline(
        config, runs=100, epsilon=1.0, delta=1e-3, seed=6,
        trainer=fixed_rng_trainer(config, default_audit_template()),
    )
    assert bad_rng.violation
