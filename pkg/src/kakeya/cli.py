"""Command-line interface: config ingestion, pipeline orchestration, output.

Commands: gen, eval, exact2d, certify, verify-lw, verify-step, reduce, sweep,
search.  Exit codes: 0 success, 1 validation error, 2 property violation,
3 non-convergence / cell budget.  The default worker count comes from the
KAKEYA_THREADS environment variable (1 if unset); outputs are deterministic
regardless of worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import certifier, experiments, reduction, serialization
from .errors import NonConvergence, PropertyViolation, ValidationError
from .evaluator import GridSpec, evaluate_overlap, evaluate_refined, exact_overlap_2d
from .generators import generate, random_lw_instance
from .loomis_whitney import Box, ProjectionFunction, verify_lw

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_VIOLATION = 2
EXIT_NONCONVERGENCE = 3

THREADS_ENV = "KAKEYA_THREADS"


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _load_config_file(path: str) -> dict:
    try:
        return serialization.load_json(path)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"malformed JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        )


def _write_output(obj: dict, out: str | None) -> None:
    if out:
        serialization.dump_json(obj, out)
    else:
        json.dump(obj, sys.stdout, indent=2)
        sys.stdout.write("\n")


def _write_csv(path: str, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])


def _cmd_gen(args) -> int:
    data = _load_config_file(args.config)
    spec = serialization.genspec_from_json(data.get("gen", data))
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    families = generate(spec)
    config = serialization.Configuration(spec.n, spec.cube, tuple(families))
    _write_output(serialization.config_to_json(config), args.out)
    return EXIT_OK


def _cmd_eval(args) -> int:
    config = serialization.config_from_json(_load_config_file(args.config))
    if args.refine:
        value = evaluate_refined(
            config.families,
            config.cube,
            args.tol,
            args.max_doublings,
            start_cells=args.grid,
            threads=args.threads,
        )
    else:
        value = evaluate_overlap(
            config.families, config.cube, GridSpec(args.grid), threads=args.threads
        )
    out = {"schema_version": serialization.SCHEMA_VERSION, **value.to_json()}
    _write_output(out, args.out)
    if not value.converged:
        print("quadrature did not converge", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _cmd_exact2d(args) -> int:
    config = serialization.config_from_json(_load_config_file(args.config))
    value = exact_overlap_2d(config.families, config.cube)
    _write_output({"schema_version": serialization.SCHEMA_VERSION, "value": value}, args.out)
    return EXIT_OK


def _resolve_delta(args) -> float:
    if args.delta is not None:
        if not (0.0 < args.delta < 1.0):
            raise ValidationError("delta must lie in (0, 1)")
        return args.delta
    if args.epsilon is not None:
        n = args._config_n
        consts = certifier.Constants.for_dimension(n)
        return certifier.delta_for_epsilon(args.epsilon, consts)
    raise ValidationError("need --delta or --epsilon")


def _cmd_certify(args) -> int:
    config = serialization.config_from_json(_load_config_file(args.config))
    args._config_n = config.n
    delta = _resolve_delta(args)
    certificate = certifier.certify_multiscale(config.families, config.cube, delta)
    out = {"schema_version": serialization.SCHEMA_VERSION, **certificate.to_json()}
    _write_output(out, args.out)
    if args.check:
        value = evaluate_overlap(
            config.families, config.cube, GridSpec(args.grid), threads=args.threads
        )
        if not certifier.check_certificate_soundness(certificate, value, tol=args.tol):
            print(
                f"violation: value {value.value!r} exceeds bound {certificate.final_bound!r}",
                file=sys.stderr,
            )
            return EXIT_VIOLATION
    return EXIT_OK


def _cmd_verify_lw(args) -> int:
    results = []
    if args.config:
        data = _load_config_file(args.config)
        fns = [
            ProjectionFunction(
                Box(
                    np.asarray(f["box"]["min_corner"], dtype=float),
                    np.asarray(f["box"]["sides"], dtype=float),
                ),
                np.asarray(f["values"], dtype=float),
            )
            for f in data["functions"]
        ]
        box = Box(
            np.asarray(data["box"]["min_corner"], dtype=float),
            np.asarray(data["box"]["sides"], dtype=float),
        )
        results.append(verify_lw(fns, box, GridSpec(args.grid)))
    else:
        for trial in range(args.trials):
            fns, box, grid = random_lw_instance(args.n, args.seed + trial)
            results.append(verify_lw(fns, box, grid))
    worst = max((r.ratio - 1.0 - 3.0 * r.error_estimate) for r in results)
    out = {
        "schema_version": serialization.SCHEMA_VERSION,
        "checks": [r.to_json() for r in results],
        "max_excess": worst,
    }
    _write_output(out, args.out)
    if worst > 0.0:
        print(f"violation: Loomis-Whitney ratio excess {worst!r}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_verify_step(args) -> int:
    config = serialization.config_from_json(_load_config_file(args.config))
    args._config_n = config.n
    delta = _resolve_delta(args)
    check = certifier.verify_step_inequality(
        config.families, config.cube, delta, GridSpec(args.grid), threads=args.threads
    )
    out = {"schema_version": serialization.SCHEMA_VERSION, **check.to_json()}
    _write_output(out, args.out)
    if check.ratio > 1.0 + args.tol:
        print(f"violation: step ratio {check.ratio!r} > 1 + {args.tol!r}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_reduce(args) -> int:
    config = serialization.config_from_json(_load_config_file(args.config))
    if args.nu is not None:
        if config.direction_sets is None:
            raise ValidationError("transversal reduction needs direction_sets in the config")
        problems = reduction.transversal_reduce(
            config.families, config.cube, list(config.direction_sets), args.nu, args.epsilon
        )
    else:
        if args.epsilon is None:
            raise ValidationError("need --epsilon")
        problems = reduction.reduce_general_to_small_angle(
            config.families, config.cube, args.epsilon
        )
    out = {
        "schema_version": serialization.SCHEMA_VERSION,
        "problems": [p.to_json() for p in problems],
    }
    _write_output(out, args.out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    data = _load_config_file(args.config)
    stanza = data.get("sweep", data)
    template = serialization.genspec_from_json(stanza["template"])
    if args.seed is not None:
        from dataclasses import replace

        template = replace(template, seed=args.seed)
    delta = args.delta if args.delta is not None else float(stanza["delta"])
    result = experiments.sweep_scale(
        template,
        stanza["s_values"],
        delta,
        tol=args.tol,
        max_doublings=args.max_doublings,
        threads=args.threads,
    )
    out = {"schema_version": serialization.SCHEMA_VERSION, **result.to_json()}
    _write_output(out, args.out)
    if args.csv:
        _write_csv(
            args.csv,
            experiments.SWEEP_CSV_COLUMNS,
            [r.csv_fields() for r in result.rows],
        )
    violated = [
        r
        for r in result.rows
        if not r.flagged
        and not certifier.check_certificate_soundness(r.certificate, r.value)
    ]
    if violated:
        print(f"violation: {len(violated)} sweep rows exceed their certificates", file=sys.stderr)
        return EXIT_VIOLATION
    if any(r.flagged for r in result.rows):
        print("some sweep rows did not converge", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _cmd_search(args) -> int:
    data = _load_config_file(args.config)
    stanza = data.get("search", data)
    cube = serialization.cube_from_json(stanza["cube"])
    result = experiments.extremal_search(
        int(stanza["n"]),
        tuple(int(c) for c in stanza["counts"]),
        cube,
        int(stanza["budget"]),
        args.seed if args.seed is not None else int(stanza["seed"]),
        grid=GridSpec(args.grid),
        annealing=bool(stanza.get("annealing", False)),
        threads=args.threads,
    )
    out = {"schema_version": serialization.SCHEMA_VERSION, **result.to_json()}
    _write_output(out, args.out)
    if args.csv:
        _write_csv(
            args.csv,
            experiments.SEARCH_CSV_COLUMNS,
            [(t.iteration, t.restart, t.accepted_ratio, t.best_ratio) for t in result.trace],
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kakeya",
        description="Tube-family overlap integrals and multiscale bound certificates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, grid_default=128):
        p.add_argument("--config", required=True, help="input JSON path")
        p.add_argument("--out", help="output JSON path (stdout if omitted)")
        p.add_argument("--threads", type=int, default=_default_threads())
        p.add_argument("--grid", type=int, default=grid_default, help="cells per side")
        p.add_argument("--tol", type=float, default=1e-2)

    p = sub.add_parser("gen", help="generate a configuration from a GenSpec")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("eval", help="quadrature value of the overlap integral")
    common(p)
    p.add_argument("--refine", action="store_true", help="double the grid until --tol")
    p.add_argument("--max-doublings", type=int, default=6)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("exact2d", help="exact n=2 polygon-clipping oracle")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_exact2d)

    p = sub.add_parser("certify", help="emit a multiscale bound certificate")
    common(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--check", action="store_true",
                   help="also evaluate and verify value <= bound")
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("verify-lw", help="check the Loomis-Whitney inequality")
    p.add_argument("--config", help="explicit grid functions (JSON)")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=32)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_verify_lw)

    p = sub.add_parser("verify-step", help="check the one-step scale inequality")
    common(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--epsilon", type=float)
    p.set_defaults(func=_cmd_verify_step)

    p = sub.add_parser("reduce", help="split into certified small-angle subproblems")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--nu", type=float, help="transversality parameter (wedge mode)")
    p.set_defaults(func=_cmd_reduce)

    p = sub.add_parser("sweep", help="scale sweep with certificates and slope fit")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--max-doublings", type=int, default=5)
    p.add_argument("--csv", help="also write rows as CSV")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("search", help="extremal-ratio perturbation search")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--csv", help="also write the trace as CSV")
    p.set_defaults(func=_cmd_search)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PropertyViolation as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except NonConvergence as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    raise SystemExit(main())
