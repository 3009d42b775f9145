"""Command-line entry point: ``ppl {evaluate, sweep, reduce, verify}``.

Exit codes: 0 ok, 1 verification failure, 2 invalid input, 3 regime or
precondition error.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
import warnings

from . import acceptance, family, generators, payoffs, reduction
from .best_response import best_response, is_fully_manipulable, solve_value
from .chain import absorption
from .errors import KnifeEdge, ParamOutOfRange, PreconditionFailed, RegimeError
from .io import DocumentError, dump, load, to_dict
from .model import THETAS, Environment, SignalModel, classify_states, shape, validate

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_REGIME = 0, 1, 2, 3


def _config(args):
    # destinations are left out so that identical runs give identical files
    skip = {"func", "output", "trace"}
    keep = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    return dict(sorted(keep.items()))


def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _env_from_args(args):
    if getattr(args, "input", None):
        env, _ = load(args.input)
        return env
    q = 0.7 if args.q is None else args.q
    p = 0.5 if args.prior is None else args.prior
    return Environment(p, SignalModel.binary_symmetric(q))


def _load_checked(path):
    """``(env, proto, None)`` or ``(None, None, error document)``."""
    try:
        env, proto = load(path)
    except (OSError, DocumentError, ValueError) as exc:
        return None, None, {"error": "invalid input", "violations": [str(exc)]}
    rep = validate(env, proto)
    if not rep.ok:
        return None, None, {"error": "invalid input", "violations": [str(v) for v in rep.violations]}
    return env, proto, None


def _fail_input(doc):
    sys.stderr.write(json.dumps(doc, indent=2) + "\n")
    return EXIT_INPUT


# -- evaluate ----------------------------------------------------------------------


def evaluation_document(env, proto):
    value = solve_value(env, proto)
    sigma = best_response(env, proto, value)
    analyses = {th: absorption(env, proto, sigma, th) for th in THETAS}
    rep = payoffs.evaluate(env, proto, sigma, analyses)
    sh = shape(proto)
    cls = classify_states(proto)
    doc = {
        "payoffs": rep.as_dict(),
        "shape": {
            "is_simple": sh.is_simple,
            "is_parsimonious": sh.is_parsimonious,
            "lo_abs": sh.lo_abs,
            "hi_abs": sh.hi_abs,
            "absorbing": sorted(cls.absorbing),
            "transient": sorted(cls.transient),
            "recurrent_classes": [sorted(c) for c in cls.recurrent_classes],
        },
        "best_response": {
            str(i): {th: ("stop" if stop else "continue") for th, stop in row.items()}
            for i, row in sigma.table().items()
        },
        "value": {str(i): {th: value(i, th) for th in THETAS} for i in proto.states},
        "absorption": {
            th: {
                "mu": {str(i): float(an.mu[i - 1]) for i in proto.states if an.mu[i - 1] != 0.0},
                "end_prob": an.end_prob,
                "expected_time": an.expected_time if an.expected_time != float("inf") else None,
                "nu": None if an.nu is None else {str(i): float(an.nu[i - 1]) for i in proto.states if an.nu[i - 1] > 0},
            }
            for th, an in analyses.items()
        },
        "warnings": [],
    }
    if is_fully_manipulable(env, proto, value):
        doc["warnings"].append("fully manipulable: the sender secures the highest action from every reachable state")
    return doc


def cmd_evaluate(args):
    env, proto, err = _load_checked(args.input)
    if err:
        return _fail_input(err)
    doc = {"config": _config(args), **evaluation_document(env, proto)}
    for w in doc["warnings"]:
        sys.stderr.write(f"warning: {w}\n")
    _write_text(args.output, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


# -- sweep -------------------------------------------------------------------------


def sweep_csv(config, result):
    buf = _io.StringIO()
    buf.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
    buf.write(f"# seed: {config.get('seed', 0)}\n")
    buf.write(f"# ratio_k2_over_k1: {result.ratio!r}\n")
    buf.write(f"# receiver_target: {result.receiver_target!r}\n")
    buf.write(f"# sender_target: {result.sender_target!r}\n")
    buf.write(f"# limit_mu_mH: {result.limit_mu_mH!r}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(family.SWEEP_COLUMNS)
    for row in result.rows:
        w.writerow([repr(float(v)) for v in row.values()])
    return buf.getvalue()


def cmd_sweep(args):
    try:
        env = _env_from_args(args)
    except (OSError, DocumentError, ValueError) as exc:
        return _fail_input({"error": "invalid input", "violations": [str(exc)]})
    m = 5 if args.m is None else args.m
    p = env.prior
    try:
        ratio = args.k_ratio if args.k_ratio is not None else family.optimal_weight_ratio(env, m)
        grid = family.geometric_grid(args.eps_max, args.eps_min, args.eps_ratio)
        res = family.sweep(env, m, grid, ratio)
    except RegimeError:
        sys.stderr.write(
            f"regime error: gamma^(m-2) = {env.gamma ** (m - 2):.6g} <= kappa = {env.kappa:.6g}; "
            f"acting on the prior is optimal, payoff max{{p,1-p}} = {max(p, 1 - p):.6g}\n"
        )
        return EXIT_REGIME
    except (ParamOutOfRange, ValueError) as exc:
        return _fail_input({"error": "invalid input", "violations": [str(exc)]})
    text = sweep_csv(_config(args), res)
    _write_text(args.output, text)
    summary = {
        "receiver_target": res.receiver_target,
        "sender_target": res.sender_target,
        "final_eps": res.final.eps,
        "receiver_gap": res.receiver_gap,
        "sender_gap": res.sender_gap,
    }
    out = sys.stderr if args.output in (None, "-") else sys.stdout
    out.write(json.dumps(summary) + "\n")
    return EXIT_OK


# -- reduce ------------------------------------------------------------------------


def cmd_reduce(args):
    if args.random:
        rng = generators.make_rng(args.seed)
        env = generators.random_environment(rng) if args.q is None else _env_from_args(args)
        proto = generators.random_protocol(rng, env, 6 if args.m is None else args.m)
    else:
        if not args.input:
            return _fail_input({"error": "invalid input", "violations": ["reduce needs --input or --random"]})
        env, proto, err = _load_checked(args.input)
        if err:
            return _fail_input(err)
    try:
        out, trace = reduction.to_parsimonious(env, proto)
    except ValueError as exc:
        return _fail_input({"error": "invalid input", "violations": [str(exc)]})
    header = {"config": _config(args)}
    if args.output and args.output != "-":
        dump(env, out, args.output, extra=header)
    else:
        sys.stdout.write(json.dumps({**header, **to_dict(env, out)}, indent=2) + "\n")
    if args.trace:
        _write_text(args.trace, json.dumps({**header, **trace.to_dict(env)}, indent=2) + "\n")
    msg = {"u_receiver_before": trace.u_input, "u_receiver_after": trace.u_final, "steps": len(trace.steps),
           "m_before": proto.m, "m_after": out.m}
    sys.stderr.write(json.dumps(msg) + "\n")
    return EXIT_OK


# -- verify ------------------------------------------------------------------------


def cmd_verify(args):
    results = acceptance.run_all(quick=args.quick)
    for r in results:
        print(r.line())
    failed = [r.id for r in results if not r.passed]
    summary = {"config": _config(args), "passed": not failed, "failed": failed,
               "results": [r.as_dict() for r in results]}
    if args.output:
        _write_text(args.output, json.dumps(summary, indent=2) + "\n")
    if failed:
        print("FAILED: " + " ".join(failed))
        return EXIT_VERIFY
    print(f"all {len(results)} criteria passed")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="ppl", description="Finite-memory persuasion protocols")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output", help="output path (default: stdout)")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("evaluate", help="payoffs, best response and absorption of a protocol file")
    p.add_argument("--input", required=True)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="sweep the ladder family over a geometric exit grid")
    p.add_argument("--input", help="take prior and signals from this protocol file")
    p.add_argument("--m", type=int)
    p.add_argument("--q", type=float, help="binary symmetric signal accuracy")
    p.add_argument("--prior", type=float)
    p.add_argument("--eps-max", type=float, default=1.0)
    p.add_argument("--eps-min", type=float, default=1e-6)
    p.add_argument("--eps-ratio", type=float, default=10.0)
    p.add_argument("--k-ratio", type=float, help="override the exit weight ratio k2/k1")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reduce", help="reduce a protocol to parsimonious form")
    p.add_argument("--input")
    p.add_argument("--random", action="store_true", help="reduce a seeded random protocol")
    p.add_argument("--m", type=int)
    p.add_argument("--q", type=float)
    p.add_argument("--prior", type=float)
    p.add_argument("--trace", help="write the reduction trace as JSON here")
    common(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--quick", action="store_true")
    common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        try:
            return args.func(args)
        except (KnifeEdge, PreconditionFailed) as exc:
            sys.stderr.write(f"precondition error: {exc}\n")
            return EXIT_REGIME


if __name__ == "__main__":
    sys.exit(main())
