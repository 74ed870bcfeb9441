"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 missing capability, 3 failed
verification.  Every subcommand prints a short human-readable summary
and, with ``--out``, writes a JSON (or CSV) report.
"""

import argparse
import json
import sys

import numpy as np

from .errors import CapabilityError, InputError, VerificationError
from .experiment import headline_failures, load_config, rows_to_csv, run_experiment, write_outputs
from .penalty import (
    largest_k_norm,
    numerical_rank,
    trimmed_l1_dir_deriv,
    trimmed_l1_value,
    truncated_nuclear_value,
)
from .problems import FAMILIES, generate_instance, problem_from_dict, problem_to_dict
from .prox import SeparableAddon, prox_bruteforce, prox_trimmed_l1, prox_truncated_nuclear
from .solvers import ALGORITHMS, SolverConfig, default_config, solve
from .stationarity import PROBE_TOL, counterexample_report, dstationarity_residual, local_opt_sample_check
from .thresholds import CATALOG_FAMILIES, certify, select_gamma, threshold_catalog

EXIT_OK, EXIT_INPUT, EXIT_CAPABILITY, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so errors map to exit code 1."""

    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def _json_value(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} is not valid JSON: {exc}") from None


def _array(text, what):
    arr = np.asarray(_json_value(text, what), dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{what} must be finite")
    return arr


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def _write(path, text):
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None


def _emit(doc, out):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        _write(out, text)
    return text


def _dims(pairs):
    dims = {}
    for item in pairs or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise InputError(f"--dim expects key=value, got {item!r}")
        dims[key] = _json_value(raw, f"--dim {key}")
    return dims


def _merge_config(args, keys):
    """Fill unset arguments from the ``--config`` JSON object."""
    if not getattr(args, "config", None):
        return
    doc = _read_json(args.config)
    if not isinstance(doc, dict):
        raise InputError("--config must hold a JSON object")
    for key in keys:
        if key in doc and getattr(args, key, None) in (None, [], False):
            val = doc[key]
            setattr(args, key, json.dumps(val) if key in ("x", "direction", "point") and not isinstance(val, str) else val)
    args.config_doc = doc


# -- subcommands ----------------------------------------------------------------------


def cmd_eval(args):
    _merge_config(args, ("x", "K", "p", "direction"))
    if args.x is None or args.K is None:
        raise InputError("eval needs --x and --K")
    x = _array(args.x, "--x")
    if x.ndim == 2:
        doc = {"kind": "truncated_nuclear", "value": truncated_nuclear_value(x, args.K),
               "rank": numerical_rank(x)}
    else:
        doc = {"kind": "trimmed_l1", "value": trimmed_l1_value(x, args.K, args.p)}
        if args.p == 1:
            doc["largest_k"] = largest_k_norm(x, args.K)
        if args.direction is not None:
            doc["dir_deriv"] = trimmed_l1_dir_deriv(x, args.K, _array(args.direction, "--direction"), args.p)
    print(f"value {doc['value']!r}")
    _emit(doc, args.out)
    return EXIT_OK


def _addon(args):
    if args.addon == "l1":
        return SeparableAddon.l1(args.eta)
    if args.addon == "box":
        return SeparableAddon.box(args.lo, args.hi)
    if args.addon == "nonneg":
        return SeparableAddon.nonneg()
    return SeparableAddon.none()


def cmd_prox(args):
    _merge_config(args, ("x", "K", "p", "gamma"))
    if args.x is None or args.K is None or args.gamma is None:
        raise InputError("prox needs --x, --K and --gamma")
    x = _array(args.x, "--x")
    if x.ndim == 2:
        res = prox_truncated_nuclear(x, args.K, args.gamma)
    else:
        res = prox_trimmed_l1(x, args.K, args.gamma, _addon(args), args.p)
    doc = {"point": np.asarray(res.point).tolist(), "objective": res.objective, "untrimmed": list(res.untrimmed)}
    status = EXIT_OK
    if args.verify:
        if x.ndim == 2:
            raise CapabilityError("the brute-force oracle covers the trimmed prox only")
        oracle = prox_bruteforce(x, args.K, args.gamma, _addon(args), args.p)
        gap = abs(oracle.objective - res.objective)
        doc["oracle_objective"] = oracle.objective
        doc["oracle_gap"] = gap
        if gap > 1e-12 * (1.0 + abs(oracle.objective)):
            status = EXIT_VERIFY
    print(f"objective {res.objective!r}")
    _emit(doc, args.out)
    return status


def _instance(args):
    """Problem from ``--instance`` JSON, else generated from family/seed/dims."""
    if getattr(args, "instance", None):
        return problem_from_dict(_read_json(args.instance))
    if not args.family:
        raise InputError("need --family or --instance")
    return generate_instance(args.family, seed=args.seed, noise=args.noise, **_dims(args.dim))


def cmd_threshold(args):
    if args.family and args.family not in FAMILIES and args.family not in CATALOG_FAMILIES:
        raise InputError(f"unknown family {args.family!r}")
    if args.rows is not None or args.cols is not None:
        if args.rows is None or args.cols is None:
            raise InputError("--rows and --cols go together")
        cert = threshold_catalog(args.family, {"rows": args.rows, "cols": args.cols})
    elif args.config:
        doc = _read_json(args.config)
        family = doc.get("family", args.family)
        if "data" not in doc or not family:
            raise InputError("threshold config needs 'family' and 'data'")
        cert = threshold_catalog(family, doc["data"])
    else:
        cert = certify(_instance(args))
    if args.verify:
        cert.recompute()
    gb = cert.gamma_bar
    print("gamma_bar " + " ".join(repr(g) for g in gb))
    _emit(cert.as_flat_dict(), args.out)
    return EXIT_OK


def _solver_args(args, problem):
    over = {"seed": args.seed, "tol": args.tol, "max_iter": args.max_iter}
    if args.x0:
        over["x0"] = args.x0
    if args.rho is not None:
        over["rho"] = args.rho
    if args.step is not None:
        over["step"] = args.step
    if args.algorithm:
        return SolverConfig(args.algorithm, **over)
    return default_config(problem, **over)


def cmd_solve(args):
    problem = _instance(args)
    if args.gamma is not None:
        gammas = tuple(args.gamma)
        gamma_bar = None
    else:
        cert = certify(problem)
        gammas = select_gamma(cert, args.multiplier)
        gamma_bar = list(cert.gamma_bar)
    report = solve(problem, gammas, _solver_args(args, problem))
    doc = report.to_dict()
    doc.update({"family": problem.family, "K": list(problem.K), "gamma": list(gammas), "gamma_bar": gamma_bar})
    if args.save_instance:
        _write(args.save_instance, json.dumps(problem_to_dict(problem), indent=2, sort_keys=True) + "\n")
    print(f"{problem.family} {report.algorithm}: converged={report.converged} iterations={report.iterations} "
          f"cardinality={list(report.cardinality)} K={list(problem.K)} residual={report.stationarity_residual!r}")
    _emit(doc, args.out)
    return EXIT_OK


def cmd_check(args):
    problem = _instance(args)
    if args.point is None:
        raise InputError("check needs --point")
    point = problem.check_point(_array(args.point, "--point"))
    if args.gamma is not None:
        gammas = tuple(args.gamma)
    else:
        gammas = select_gamma(certify(problem), args.multiplier)
    verdict = dstationarity_residual(problem, gammas, point, tol=args.tol, seed=args.seed)
    doc = {"gamma": list(gammas), "stationarity": verdict.to_dict()}
    ok = verdict.is_necessary_pass
    if args.samples:
        sample = local_opt_sample_check(problem, gammas, point, radius=args.radius, samples=args.samples, seed=args.seed)
        doc["sampling"] = sample.to_dict()
        ok = ok and sample.passed
    print(f"residual {verdict.residual!r} ({verdict.worst_provenance}) pass={ok}")
    _emit(doc, args.out)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_counterexample(args):
    doc = counterexample_report(args.gamma, radius=args.radius, samples=args.samples, seed=args.seed)
    print(f"probe residual {doc['probe_residual']!r} (pass={doc['probe_pass']}), "
          f"max sampled decrease {doc['max_decrease']!r}, separates={doc['separates']}")
    _emit(doc, args.out)
    return EXIT_OK if doc["separates"] else EXIT_VERIFY


def cmd_experiment(args):
    config = load_config(args.config)
    rows = run_experiment(config)
    write_outputs(rows, config)
    if args.out:
        _write(args.out, rows_to_csv(rows))
    failed = headline_failures(rows)
    applies = sum(r.headline_applies for r in rows)
    errors = sum(r.status != "ok" for r in rows)
    print(f"{config.family}: {len(rows)} rows, {applies} covered by the exact-penalty check, "
          f"{len(failed)} violations, {errors} solver errors")
    return EXIT_VERIFY if failed else EXIT_OK


# -- parser -------------------------------------------------------------------------


def _problem_options(p):
    p.add_argument("--family", choices=sorted(FAMILIES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--dim", action="append", metavar="KEY=VALUE", help="generator dimension, e.g. --dim n=12")
    p.add_argument("--instance", help="problem JSON written by solve --save-instance")


def build_parser():
    parser = _Parser(prog="tlx", description="Trimmed and truncated penalty toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("eval", help="penalty values and directional derivatives")
    p.add_argument("--x", help="JSON vector (trimmed l1) or matrix (truncated nuclear)")
    p.add_argument("--K", type=int)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--direction", help="JSON direction for the one-sided derivative")
    p.set_defaults(run=cmd_eval)

    p = sub.add_parser("prox", help="prox of the trimmed or truncated penalty")
    p.add_argument("--x")
    p.add_argument("--K", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--addon", choices=("none", "l1", "box", "nonneg"), default="none")
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--lo", type=float, default=-np.inf)
    p.add_argument("--hi", type=float, default=np.inf)
    p.add_argument("--verify", action="store_true", help="compare against the brute-force oracle")
    p.set_defaults(run=cmd_prox)

    p = sub.add_parser("threshold", help="exact-penalty threshold with its certificate")
    _problem_options(p)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--verify", action="store_true", help="replay the certificate")
    p.set_defaults(run=cmd_threshold)

    p = sub.add_parser("solve", help="solve a generated or saved instance")
    _problem_options(p)
    p.add_argument("--gamma", type=float, nargs="+")
    p.add_argument("--multiplier", type=float, default=1.001)
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--rho", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--x0", choices=("random",))
    p.add_argument("--save-instance")
    p.set_defaults(run=cmd_solve)

    p = sub.add_parser("check", help="probe stationarity (and optional local sampling) at a point")
    _problem_options(p)
    p.add_argument("--point", help="JSON point")
    p.add_argument("--gamma", type=float, nargs="+")
    p.add_argument("--multiplier", type=float, default=1.001)
    p.add_argument("--tol", type=float, default=PROBE_TOL)
    p.add_argument("--samples", type=int, default=0)
    p.add_argument("--radius", type=float, default=1e-4)
    p.set_defaults(run=cmd_check)

    p = sub.add_parser("counterexample", help="d-stationary but not locally optimal 2x2 example")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(run=cmd_counterexample)

    p = sub.add_parser("experiment", help="seeded sweep over gamma multipliers")
    p.set_defaults(run=cmd_experiment)

    for name, p in sub.choices.items():
        p.add_argument("--out", help="output file")
        if name != "experiment":
            p.add_argument("--config", help="JSON file with the same fields as the flags")
        else:
            p.add_argument("--config", required=True, help="experiment config JSON")
    return parser


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            print(parser.format_usage(), file=sys.stderr, end="")
            return EXIT_INPUT
        return args.run(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if str(exc).startswith("tlx") and "invalid choice" in str(exc):
            print(parser.format_usage(), file=sys.stderr, end="")
        return EXIT_INPUT
    except CapabilityError as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
