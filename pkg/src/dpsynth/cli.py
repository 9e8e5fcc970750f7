"""Batch command-line interface: fit, generate, evaluate, audit.

Exit codes: 0 ok, 2 validation error, 3 budget error, 4 infeasible
condition, 5 audit violation.  Reports go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from .audit import (
    audit_pipeline,
    domain_from_data_trainer,
    fixed_rng_trainer,
    default_audit_template,
    naive_float_gaussian,
    support_collision_audit_sweep,
)
from .budget import rho_of_eps, sigma_for_rho
from .dataset import column_table, read_csv, write_csv
from .domain import ColumnSpec, Domain, load_domain
from .errors import (
    BudgetExhausted,
    BudgetRequired,
    DpSynthError,
    InfeasibleCondition,
    InvalidArgument,
)
from .mechanisms import NoiseScale, gaussian_mechanism
from .metrics import utility_report
from .synthesizer import SynthesizerConfig, fit, generate, pretrain_public, fit_private
from . import container

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUDGET = 3
EXIT_INFEASIBLE = 4
EXIT_VIOLATION = 5

_FIXTURES = ("naive-float", "domain-from-data", "fixed-rng")


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _infer_domain_from_csv(header, rows) -> Domain:
    """Domain for data supplied without a document: numeric columns only,
    bounds left absent so they must be DP-extracted."""
    cols = []
    for j, name in enumerate(header):
        numeric = True
        for row in rows:
            try:
                float(row[j])
            except ValueError:
                numeric = False
                break
        if not numeric:
            raise InvalidArgument(
                f"column {name!r} is not numeric; categorical columns require "
                "a domain document declaring their categories"
            )
        cols.append(ColumnSpec(name=name, kind="numerical", bounds=None))
    return Domain(columns=tuple(cols), cardinalities=tuple(1 for _ in cols))


def cmd_fit(args) -> int:
    try:
        header, rows = read_csv(args.data)
        data = column_table(header, rows)
        if args.domain:
            domain = load_domain(args.domain)
        else:
            domain = _infer_domain_from_csv(header, rows)
        config = SynthesizerConfig(
            model=args.model,
            epsilon=args.epsilon,
            delta=args.delta,
            epsilon_proc=args.proc_epsilon,
            degree=args.degree,
            size_cap_mb=args.size_cap_mb,
            discretization=args.discretization,
            bins=args.bins,
            seed=args.seed,
        )
        if args.public_data:
            pub_header, pub_rows = read_csv(args.public_data)
            state = pretrain_public(
                config, column_table(pub_header, pub_rows), domain, seed=args.seed
            )
            fitted = fit_private(state, data, seed=args.seed)
        else:
            fitted = fit(config, data, domain, seed=args.seed)
        container.save(fitted, args.out)
        ledger = fitted.ledger_snapshot
        print(
            json.dumps(
                {
                    "model": args.model,
                    "rho_total": ledger["total_rho"],
                    "rho_spent": ledger["spent_rho"],
                    "charges": len(ledger["log"]),
                    "out": args.out,
                }
            )
        )
        return EXIT_OK
    except (BudgetRequired, BudgetExhausted) as exc:
        return _fail(EXIT_BUDGET, str(exc))
    except DpSynthError as exc:
        return _fail(EXIT_VALIDATION, str(exc))


def _parse_conditions(raw: list[str], domain: Domain) -> dict:
    conditions = {}
    for item in raw:
        if "=" not in item:
            raise InvalidArgument(f"condition {item!r} is not of the form col=value")
        name, value = item.split("=", 1)
        name = name.strip()
        col = domain.columns[domain.index_of(name)]
        if col.kind == "numerical":
            if ".." in value:
                a, b = value.split("..", 1)
                conditions[name] = (float(a), float(b))
            else:
                conditions[name] = float(value)
        else:
            conditions[name] = value
    return conditions


def cmd_generate(args) -> int:
    try:
        fitted = container.load(args.model)
        conditions = _parse_conditions(args.condition or [], fitted.domain)
        table = generate(fitted, args.rows, conditions=conditions, seed=args.seed)
        names = [c.name for c in fitted.domain.columns]
        rows = [[_fmt(table[n][i]) for n in names] for i in range(args.rows)]
        if args.out:
            write_csv(args.out, names, rows)
        else:
            sys.stdout.write(",".join(names) + "\n")
            for row in rows:
                sys.stdout.write(",".join(row) + "\n")
        return EXIT_OK
    except InfeasibleCondition as exc:
        return _fail(EXIT_INFEASIBLE, str(exc))
    except DpSynthError as exc:
        return _fail(EXIT_VALIDATION, str(exc))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def cmd_evaluate(args) -> int:
    try:
        real_h, real_rows = read_csv(args.real)
        synth_h, synth_rows = read_csv(args.synth)
        domain = load_domain(args.domain)
        report = utility_report(
            column_table(real_h, real_rows),
            column_table(synth_h, synth_rows),
            domain,
            bins=args.bins,
            seed=args.seed,
        )
        text = json.dumps(report, indent=2, sort_keys=True)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        return EXIT_OK
    except DpSynthError as exc:
        return _fail(EXIT_VALIDATION, str(exc))


def cmd_audit(args) -> int:
    try:
        if args.runs < 100:
            raise InvalidArgument("--runs must be at least 100")
        fixture = None
        model = args.model
        if model.startswith("fixture:"):
            fixture = model.split(":", 1)[1]
            if fixture not in _FIXTURES:
                raise InvalidArgument(
                    f"unknown fixture {fixture!r}; choose from {_FIXTURES}"
                )

        if args.suite == "float":
            rho = rho_of_eps(args.epsilon, args.delta)
            sigma = sigma_for_rho(rho)
            if fixture == "naive-float":
                mech = naive_float_gaussian(sigma)
                pair = (0.0, 2.0**40)
            elif fixture is None:
                scale = NoiseScale.from_sigma(Fraction(sigma))
                mech = lambda v, rng: float(gaussian_mechanism([v], 1.0, scale, rng)[0])
                pair = (0.0, 1.0)  # sensitivity-respecting neighbors
            else:
                raise InvalidArgument(
                    f"fixture {fixture!r} is audited with --suite game"
                )
            outcome = support_collision_audit_sweep(
                mech, pair[0], pair[1],
                probes=max(args.runs * 10, 10_000),
                support_samples=max(args.runs * 10, 10_000),
                delta=args.delta, eps_claimed=args.epsilon, seed=args.seed,
            )
        else:
            template = default_audit_template()
            config = SynthesizerConfig(
                model=model if fixture is None else "mst",
                epsilon=args.epsilon,
                delta=args.delta,
            )
            trainer = None
            if fixture == "domain-from-data":
                trainer = domain_from_data_trainer(config)
            elif fixture == "fixed-rng":
                trainer = fixed_rng_trainer(config, template)
            elif fixture == "naive-float":
                raise InvalidArgument("fixture 'naive-float' is audited with --suite float")
            outcome = audit_pipeline(
                config, runs=args.runs, epsilon=args.epsilon, delta=args.delta,
                seed=args.seed, template=template, trainer=trainer,
                workers=args.threads,
            )
        print(json.dumps(outcome.to_dict(), indent=2, sort_keys=True))
        return EXIT_VIOLATION if outcome.violation else EXIT_OK
    except DpSynthError as exc:
        return _fail(EXIT_VALIDATION, str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpsynth",
        description="Differentially private synthetic data via marginal models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="train a synthesizer")
    p_fit.add_argument("--model", required=True, choices=["privbayes", "mst", "aim"])
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--domain")
    p_fit.add_argument("--epsilon", type=float, required=True)
    p_fit.add_argument("--delta", type=float, default=1e-5)
    p_fit.add_argument("--proc-epsilon", type=float, dest="proc_epsilon")
    p_fit.add_argument("--degree", type=int, default=2)
    p_fit.add_argument("--size-cap-mb", type=float, default=80.0, dest="size_cap_mb")
    p_fit.add_argument(
        "--discretization", choices=["privtree", "uniform"], default="privtree"
    )
    p_fit.add_argument("--bins", type=int, default=20)
    p_fit.add_argument("--public-data", dest="public_data")
    p_fit.add_argument("--seed", type=int)
    p_fit.add_argument("--out", required=True)
    p_fit.set_defaults(func=cmd_fit)

    p_gen = sub.add_parser("generate", help="sample synthetic rows from a model")
    p_gen.add_argument("--model", required=True)
    p_gen.add_argument("--rows", type=int, required=True)
    p_gen.add_argument("--condition", action="append")
    p_gen.add_argument("--seed", type=int)
    p_gen.add_argument("--out")
    p_gen.set_defaults(func=cmd_generate)

    p_eval = sub.add_parser("evaluate", help="score synthetic against real data")
    p_eval.add_argument("--real", required=True)
    p_eval.add_argument("--synth", required=True)
    p_eval.add_argument("--domain", required=True)
    p_eval.add_argument("--bins", type=int, default=20)
    p_eval.add_argument("--seed", type=int)
    p_eval.add_argument("--out")
    p_eval.set_defaults(func=cmd_evaluate)

    p_audit = sub.add_parser("audit", help="run a DP audit")
    p_audit.add_argument("--suite", required=True, choices=["game", "float"])
    p_audit.add_argument("--model", required=True)
    p_audit.add_argument("--runs", type=int, default=1000)
    p_audit.add_argument("--epsilon", type=float, default=1.0)
    p_audit.add_argument("--delta", type=float, default=1e-3)
    p_audit.add_argument("--seed", type=int)
    p_audit.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p_audit.set_defaults(func=cmd_audit)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
